#include "dualsim/dual.hpp"

#include <algorithm>
#include <cmath>

namespace dualsim {

int ConeSpec::joint_rows() const {
  int n = 0;
  for (int d : joint_dims) n += d;
  return n;
}

void SofteningParams::validate() const {
  if (!(d0 > 0.0 && d0 <= dw && dw <= 1.0)) {
    throw Error("softening: require 0 < d0 <= dw <= 1");
  }
  if (!(width >= 0.0) || !(midpoint > 0.0 && midpoint < 1.0) || !(power >= 1.0) ||
      !(time_constant > 0.0) || !(damping_ratio > 0.0)) {
    throw Error("softening: invalid shaping parameters");
  }
}

MatX DualProblem::effective_delassus() const {
  if (!softened()) return delassus;
  MatX D = delassus;
  D.diagonal() += regularizer;
  return D;
}

VecX DualProblem::effective_free_velocity() const {
  if (!softened()) return free_velocity;
  return free_velocity + regulation_bias;
}

double softening_impedance(double residual, const SofteningParams& p) {
  if (p.d0 == p.dw || p.width < 1e-15) return 0.5 * (p.d0 + p.dw);
  const double x = std::abs(residual - p.midpoint) / p.width;
  if (x >= 1.0) return p.dw;
  if (x <= 0.0) return p.d0;
  double fs;
  if (p.power == 1.0) {
    fs = x;
  } else if (x <= p.midpoint) {
    fs = std::pow(x, p.power) / std::pow(p.midpoint, p.power - 1.0);
  } else {
    fs = 1.0 - std::pow(1.0 - x, p.power) / std::pow(1.0 - p.midpoint, p.power - 1.0);
  }
  return p.d0 + fs * (p.dw - p.d0);
}

MatX delassus_matrix(const AssembledStep& step) {
  const int nb = step.num_bodies();
  const int nd = step.num_rows();
  MatX MinvJt(6 * nb, nd);
  for (int i = 0; i < nb; ++i) {
    const Eigen::LLT<Mat6> llt(step.mass_blocks[i]);
    if (llt.info() != Eigen::Success) throw Error("delassus_matrix: singular mass block");
    MinvJt.middleRows<6>(6 * i) =
        llt.solve(step.jacobian.middleCols<6>(6 * i).transpose());
  }
  MatX D = step.jacobian * MinvJt;
  return 0.5 * (D + D.transpose());
}

VecX de_saxce_correction(const VecX& v, const ConeSpec& cone) {
  VecX s = VecX::Zero(v.size());
  for (int k = 0; k < cone.num_contacts(); ++k) {
    const int o = cone.contact_offset(k);
    s[o + 2] = cone.contact_mus[k] * std::hypot(v[o], v[o + 1]);
  }
  return s;
}

ConeSpec cone_from_step(const AssembledStep& step) {
  ConeSpec c;
  c.joint_dims = step.joint_dims;
  c.limit_rows = step.num_limits();
  for (const auto& cp : step.contacts) c.contact_mus.push_back(cp.friction);
  return c;
}

VecX constraint_residuals(const AssembledStep& step, double penetration_margin) {
  const ConeSpec cone = cone_from_step(step);
  VecX r = VecX::Zero(step.num_rows());
  r.head(cone.joint_rows()) = step.joint_residuals;
  r.segment(cone.limit_offset(), cone.limit_rows) = step.limit_residuals;
  for (int k = 0; k < cone.num_contacts(); ++k) {
    r[cone.contact_offset(k) + 2] = step.contact_gaps[k] + penetration_margin;
  }
  return r;
}

VecX stabilization_bias(const AssembledStep& step, const StabilizationParams& params,
                        double dt) {
  if (!(dt > 0.0)) throw Error("stabilization_bias: dt must be positive");
  const ConeSpec cone = cone_from_step(step);
  VecX b = VecX::Zero(step.num_rows());
  const int nj = cone.joint_rows();
  b.head(nj) = (params.alpha_joint / dt) * step.joint_residuals;
  for (int l = 0; l < cone.limit_rows; ++l) {
    b[nj + l] = (params.beta_limit / dt) * std::min(0.0, step.limit_residuals[l]);
  }
  for (int k = 0; k < cone.num_contacts(); ++k) {
    const double r = (step.contact_gaps[k] + params.penetration_margin) / dt;
    b[cone.contact_offset(k) + 2] =
        params.gamma_contact * std::min(0.0, r) + std::max(0.0, r);
  }
  return b;
}

SofteningTerms softening_terms(const VecX& residuals, const VecX& delassus_diag,
                               const VecX& v_minus, const SofteningParams& params,
                               double dt) {
  params.validate();
  const int n = static_cast<int>(residuals.size());
  if (delassus_diag.size() != n || v_minus.size() != n) {
    throw Error("softening_terms: dimension mismatch");
  }
  SofteningTerms t;
  t.regularizer.resize(n);
  t.regulation_bias.resize(n);
  const double b = 2.0 / (params.dw * params.time_constant);
  for (int j = 0; j < n; ++j) {
    const double d = softening_impedance(residuals[j], params);
    if (!(d > 0.0)) throw Error("softening_terms: zero impedance");
    const double c = (1.0 - d) / d;
    const double k = d / (params.dw * params.dw * params.time_constant *
                          params.time_constant * params.damping_ratio *
                          params.damping_ratio);
    t.regularizer[j] = c * delassus_diag[j];
    t.regulation_bias[j] = dt * (b * v_minus[j] + k * residuals[j]);
  }
  return t;
}

DualProblem build_dual_problem(const AssembledStep& step, const DualOptions& options) {
  DualProblem p;
  p.dt = step.dt;
  p.layout = step.layout;
  p.cone = cone_from_step(step);
  p.pre_velocity = step.pre_velocity;
  for (const Mat6& M : step.mass_blocks) p.total_diag_inertia += M.trace();
  p.delassus = delassus_matrix(step);

  // v_f = J (u- + dt M^-1 h)
  VecX u_free = step.u_minus;
  for (int i = 0; i < step.num_bodies(); ++i) {
    u_free.segment<6>(6 * i) +=
        step.dt * step.mass_blocks[i].llt().solve(step.bias_force.segment<6>(6 * i));
  }
  p.free_velocity = step.jacobian * u_free;

  if (options.restitution) {
    for (int k = 0; k < p.cone.num_contacts(); ++k) {
      const int row = p.cone.contact_offset(k) + 2;
      const double vn = step.pre_velocity[row];
      if (vn < 0.0) p.free_velocity[row] += step.contacts[k].restitution * vn;
    }
  }
  if (options.stabilize) {
    p.free_velocity += stabilization_bias(step, options.stabilization, step.dt);
  }
  if (options.soften) {
    const SofteningTerms t = softening_terms(
        constraint_residuals(step, options.stabilization.penetration_margin),
        p.delassus.diagonal(), step.pre_velocity, options.softening, step.dt);
    p.regularizer = t.regularizer;
    p.regulation_bias = t.regulation_bias;
  }
  return p;
}

}  // namespace dualsim
