#include "dualsim/model.hpp"

#include <cmath>
#include <sstream>

namespace dualsim {

Shape Shape::sphere(double r) {
  Shape s;
  s.kind = ShapeKind::kSphere;
  s.radius = r;
  return s;
}

Shape Shape::box(const Vec3& half_extents) {
  Shape s;
  s.kind = ShapeKind::kBox;
  s.half_extents = half_extents;
  return s;
}

BodySpec BodySpec::solid(const std::string& name, double mass, const Shape& s) {
  BodySpec b;
  b.name = name;
  b.mass = mass;
  b.shape = s;
  if (s.kind == ShapeKind::kSphere) {
    b.local_inertia = Mat3::Identity() * (0.4 * mass * s.radius * s.radius);
  } else {
    const Vec3 d = 2.0 * s.half_extents;
    const double k = mass / 12.0;
    b.local_inertia = Vec3(k * (d.y() * d.y() + d.z() * d.z()),
                           k * (d.x() * d.x() + d.z() * d.z()),
                           k * (d.x() * d.x() + d.y() * d.y()))
                          .asDiagonal();
  }
  return b;
}

std::vector<int> JointSpec::constrained_dims() const {
  switch (kind) {
    case JointKind::kFixed: return {0, 1, 2, 3, 4, 5};
    case JointKind::kRevolute: return {0, 1, 2, 3, 4};
    case JointKind::kSpherical: return {0, 1, 2};
    case JointKind::kPrismatic: return {0, 1, 3, 4, 5};
  }
  return {};
}

std::vector<int> JointSpec::free_dims() const {
  switch (kind) {
    case JointKind::kFixed: return {};
    case JointKind::kRevolute: return {5};
    case JointKind::kSpherical: return {3, 4, 5};
    case JointKind::kPrismatic: return {2};
  }
  return {};
}

int JointSpec::num_constraints() const {
  return static_cast<int>(constrained_dims().size());
}

int JointSpec::num_dofs() const { return static_cast<int>(free_dims().size()); }

namespace {

MatX selector_from(const std::vector<int>& dims) {
  MatX S = MatX::Zero(6, static_cast<int>(dims.size()));
  for (size_t i = 0; i < dims.size(); ++i) S(dims[i], static_cast<int>(i)) = 1.0;
  return S;
}

bool is_rotation(const Mat3& R) {
  return (R.transpose() * R - Mat3::Identity()).norm() < 1e-9 &&
         std::abs(R.determinant() - 1.0) < 1e-9;
}

}  // namespace

MatX JointSpec::constraint_selector() const {
  return selector_from(constrained_dims());
}

MatX JointSpec::actuation_selector() const { return selector_from(free_dims()); }

void SystemModel::validate() const {
  const int nb = num_bodies();
  for (const auto& b : bodies) {
    if (!(b.mass > 0.0)) throw Error("body '" + b.name + "': mass must be positive");
    Eigen::SelfAdjointEigenSolver<Mat3> es(b.local_inertia);
    if ((b.local_inertia - b.local_inertia.transpose()).norm() > 1e-12 ||
        es.eigenvalues().minCoeff() <= 0.0) {
      throw Error("body '" + b.name + "': inertia must be symmetric positive definite");
    }
    if (b.shape.kind == ShapeKind::kSphere && !(b.shape.radius > 0.0)) {
      throw Error("body '" + b.name + "': sphere radius must be positive");
    }
    if (b.shape.kind == ShapeKind::kBox && !(b.shape.half_extents.minCoeff() > 0.0)) {
      throw Error("body '" + b.name + "': box half-extents must be positive");
    }
  }
  for (const auto& j : joints) {
    if (j.follower_body < 0 || j.follower_body >= nb ||
        j.base_body < kWorld || j.base_body >= nb || j.base_body == j.follower_body) {
      throw Error("joint '" + j.name + "': invalid body indices");
    }
    if (!is_rotation(j.axes) || !is_rotation(j.follower_axes)) {
      throw Error("joint '" + j.name + "': axes must be rotations");
    }
    for (const auto& l : j.limits) {
      if (l.dof < 0 || l.dof >= j.num_dofs() || !(l.q_min < l.q_max)) {
        throw Error("joint '" + j.name + "': invalid limit");
      }
    }
  }
  for (const auto& p : planes) {
    if (std::abs(p.normal.norm() - 1.0) > 1e-9) throw Error("plane normal must be unit");
  }
}

int AssembledStep::num_joint_rows() const {
  int n = 0;
  for (int d : joint_dims) n += d;
  return n;
}

MatX AssembledStep::mass_matrix() const {
  const int nb = num_bodies();
  MatX M = MatX::Zero(6 * nb, 6 * nb);
  for (int i = 0; i < nb; ++i) M.block<6, 6>(6 * i, 6 * i) = mass_blocks[i];
  return M;
}

VecX stack_velocities(const std::vector<BodyState>& states) {
  VecX u(6 * states.size());
  for (size_t i = 0; i < states.size(); ++i) {
    u.segment<3>(6 * i) = states[i].linear_velocity;
    u.segment<3>(6 * i + 3) = states[i].angular_velocity;
  }
  return u;
}

std::vector<BodyState> integrate_semi_implicit(
    const std::vector<BodyState>& states, const VecX& u_plus, double dt) {
  if (!(dt > 0.0)) throw Error("integrate_semi_implicit: dt must be positive");
  if (u_plus.size() != static_cast<Eigen::Index>(6 * states.size())) {
    throw Error("integrate_semi_implicit: velocity dimension mismatch");
  }
  if (!u_plus.allFinite()) throw Error("integrate_semi_implicit: non-finite velocity");
  std::vector<BodyState> out = states;
  for (size_t i = 0; i < states.size(); ++i) {
    BodyState& s = out[i];
    s.linear_velocity = u_plus.segment<3>(6 * i);
    s.angular_velocity = u_plus.segment<3>(6 * i + 3);
    s.position += dt * s.linear_velocity;
    s.orientation = quat_exp(dt * s.angular_velocity) * s.orientation;
    s.orientation.normalize();
  }
  return out;
}

void body_mass_and_bias(const BodySpec& spec, const BodyState& state,
                        const Vec3& gravity, Mat6* M, Vec6* w_gc) {
  const Mat3 R = state.orientation.toRotationMatrix();
  const Mat3 I = R * spec.local_inertia * R.transpose();
  M->setZero();
  M->topLeftCorner<3, 3>() = spec.mass * Mat3::Identity();
  M->bottomRightCorner<3, 3>() = 0.5 * (I + I.transpose());
  const Vec3& w = state.angular_velocity;
  w_gc->head<3>() = spec.mass * gravity;
  w_gc->tail<3>() = -w.cross(I * w);
}

namespace {

struct JointFrames {
  Mat3 R_base;   // base joint frame in world
  Vec3 p_base;   // base anchor in world
  Mat3 R_foll;   // follower joint frame in world
  Vec3 p_foll;   // follower anchor in world
};

JointFrames joint_frames(const JointSpec& j, const std::vector<BodyState>& states) {
  JointFrames f;
  if (j.base_body == kWorld) {
    f.R_base = j.axes;
    f.p_base = j.anchor_base;
  } else {
    const BodyState& b = states.at(j.base_body);
    const Mat3 Rb = b.orientation.toRotationMatrix();
    f.R_base = Rb * j.axes;
    f.p_base = b.position + Rb * j.anchor_base;
  }
  const BodyState& fs = states.at(j.follower_body);
  const Mat3 Rf = fs.orientation.toRotationMatrix();
  f.R_foll = Rf * j.follower_axes;
  f.p_foll = fs.position + Rf * j.anchor_follower;
  return f;
}

}  // namespace

JointKinematics joint_kinematics(const JointSpec& joint,
                                 const std::vector<BodyState>& states) {
  const JointFrames f = joint_frames(joint, states);
  JointKinematics k;
  k.frame_position = f.p_base;
  k.frame_rotation = f.R_base;
  k.error.head<3>() = f.R_base.transpose() * (f.p_foll - f.p_base);
  k.error.tail<3>() = so3_log(f.R_base.transpose() * f.R_foll);
  const auto cd = joint.constrained_dims();
  const auto fd = joint.free_dims();
  k.residual.resize(static_cast<int>(cd.size()));
  for (size_t i = 0; i < cd.size(); ++i) k.residual[i] = k.error[cd[i]];
  k.dof_config.resize(static_cast<int>(fd.size()));
  for (size_t i = 0; i < fd.size(); ++i) k.dof_config[i] = k.error[fd[i]];
  return k;
}

MatX joint_error_jacobian(const JointSpec& joint,
                          const std::vector<BodyState>& states, int num_bodies) {
  const JointFrames f = joint_frames(joint, states);
  const Vec3 theta = so3_log(f.R_base.transpose() * f.R_foll);
  const Mat3 RbT = f.R_base.transpose();
  const Mat3 JlinvRbT = so3_left_jacobian_inverse(theta) * RbT;
  MatX G = MatX::Zero(6, 6 * num_bodies);
  const int fi = joint.follower_body;
  const Vec3 r_f = f.p_foll - states[fi].position;
  G.block<3, 3>(0, 6 * fi) = RbT;
  G.block<3, 3>(0, 6 * fi + 3) = -RbT * skew(r_f);
  G.block<3, 3>(3, 6 * fi + 3) = JlinvRbT;
  if (joint.base_body != kWorld) {
    const int bi = joint.base_body;
    // The base contributes the motion of its rigid extension at the follower anchor.
    const Vec3 r_b = f.p_foll - states[bi].position;
    G.block<3, 3>(0, 6 * bi) = -RbT;
    G.block<3, 3>(0, 6 * bi + 3) = RbT * skew(r_b);
    G.block<3, 3>(3, 6 * bi + 3) = -JlinvRbT;
  }
  return G;
}

std::vector<LimitRecord> detect_active_limits(
    const std::vector<JointSpec>& joints, const std::vector<BodyState>& states) {
  std::vector<LimitRecord> out;
  for (size_t ji = 0; ji < joints.size(); ++ji) {
    const JointSpec& j = joints[ji];
    if (j.limits.empty()) continue;
    const JointKinematics k = joint_kinematics(j, states);
    const auto fd = j.free_dims();
    for (const JointLimit& l : j.limits) {
      const double q = k.dof_config[l.dof];
      const double g_min = q - l.q_min;
      const double g_max = l.q_max - q;
      LimitRecord r;
      r.joint = static_cast<int>(ji);
      r.dof = l.dof;
      r.selector = Vec6::Zero();
      r.selector[fd[l.dof]] = 1.0;
      if (g_min <= 0.0) {
        r.side = LimitSide::kMin;
        r.gap = g_min;
        out.push_back(r);
      } else if (g_max <= 0.0) {
        r.side = LimitSide::kMax;
        r.gap = g_max;
        out.push_back(r);
      }
    }
  }
  return out;
}

AssembledStep assemble_system(const SystemModel& model,
                              const std::vector<BodyState>& states, double dt,
                              const ExternalInputs& inputs,
                              const std::vector<ContactPoint>& contacts) {
  if (!(dt > 0.0)) throw Error("assemble_system: dt must be positive");
  const int nb = model.num_bodies();
  if (static_cast<int>(states.size()) != nb) {
    throw Error("assemble_system: state count does not match the model");
  }
  if (!inputs.wrenches.empty() && static_cast<int>(inputs.wrenches.size()) != nb) {
    throw Error("assemble_system: wrench count does not match the model");
  }
  for (const auto& c : contacts) {
    if (c.body_b < 0 || c.body_b >= nb || c.body_a < kWorld || c.body_a >= nb ||
        c.body_a == c.body_b) {
      throw Error("assemble_system: contact references invalid bodies");
    }
  }
  AssembledStep s;
  s.dt = dt;
  s.contacts = contacts;
  s.mass_blocks.resize(nb);
  s.bias_force = VecX::Zero(6 * nb);
  for (int i = 0; i < nb; ++i) {
    Vec6 w;
    body_mass_and_bias(model.bodies[i], states[i], model.gravity, &s.mass_blocks[i], &w);
    s.bias_force.segment<6>(6 * i) = w;
    if (!inputs.wrenches.empty()) s.bias_force.segment<6>(6 * i) += inputs.wrenches[i];
  }
  s.u_minus = stack_velocities(states);

  // Joint error Jacobians are shared by joint rows, limit rows and actuation.
  std::vector<MatX> G(model.joints.size());
  for (size_t j = 0; j < model.joints.size(); ++j) {
    G[j] = joint_error_jacobian(model.joints[j], states, nb);
  }

  int total_dofs = 0;
  for (const auto& j : model.joints) total_dofs += j.num_dofs();
  if (inputs.actuation.size() > 0) {
    if (inputs.actuation.size() != total_dofs) {
      throw Error("assemble_system: actuation dimension mismatch");
    }
    int off = 0;
    for (size_t j = 0; j < model.joints.size(); ++j) {
      const auto fd = model.joints[j].free_dims();
      for (size_t d = 0; d < fd.size(); ++d) {
        s.bias_force += G[j].row(fd[d]).transpose() * inputs.actuation[off + static_cast<int>(d)];
      }
      off += static_cast<int>(fd.size());
    }
  }

  s.limits = detect_active_limits(model.joints, states);
  int nd = 0;
  for (const auto& j : model.joints) {
    s.joint_dims.push_back(j.num_constraints());
    nd += j.num_constraints();
  }
  const int nj_rows = nd;
  nd += static_cast<int>(s.limits.size()) + 3 * static_cast<int>(contacts.size());

  s.jacobian = MatX::Zero(nd, 6 * nb);
  s.joint_residuals = VecX::Zero(nj_rows);
  s.limit_residuals = VecX::Zero(static_cast<int>(s.limits.size()));
  s.contact_gaps = VecX::Zero(static_cast<int>(contacts.size()));

  int row = 0;
  for (size_t j = 0; j < model.joints.size(); ++j) {
    const JointSpec& js = model.joints[j];
    const auto cd = js.constrained_dims();
    const JointKinematics k = joint_kinematics(js, states);
    ConstraintBlock b;
    b.kind = ConstraintKind::kJoint;
    b.index = static_cast<int>(j);
    b.offset = row;
    b.rows = static_cast<int>(cd.size());
    s.layout.push_back(b);
    for (size_t c = 0; c < cd.size(); ++c) {
      s.jacobian.row(row) = G[j].row(cd[c]);
      s.joint_residuals[row] = k.residual[c];
      ++row;
    }
  }
  for (size_t l = 0; l < s.limits.size(); ++l) {
    const LimitRecord& lr = s.limits[l];
    const double sign = lr.side == LimitSide::kMin ? 1.0 : -1.0;
    ConstraintBlock b;
    b.kind = ConstraintKind::kLimit;
    b.index = static_cast<int>(l);
    b.offset = row;
    b.rows = 1;
    s.layout.push_back(b);
    s.jacobian.row(row) = sign * (lr.selector.transpose() * G[lr.joint]);
    s.limit_residuals[l] = lr.gap;
    ++row;
  }
  for (size_t c = 0; c < contacts.size(); ++c) {
    const ContactPoint& cp = contacts[c];
    const Mat3 R = contact_frame_basis(cp.normal);
    const Mat3 RT = R.transpose();
    ConstraintBlock b;
    b.kind = ConstraintKind::kContact;
    b.index = static_cast<int>(c);
    b.offset = row;
    b.rows = 3;
    b.friction = cp.friction;
    b.restitution = cp.restitution;
    s.layout.push_back(b);
    const int bi = cp.body_b;
    s.jacobian.block<3, 3>(row, 6 * bi) = RT;
    s.jacobian.block<3, 3>(row, 6 * bi + 3) = -RT * skew(cp.position - states[bi].position);
    if (cp.body_a != kWorld) {
      const int ai = cp.body_a;
      s.jacobian.block<3, 3>(row, 6 * ai) = -RT;
      s.jacobian.block<3, 3>(row, 6 * ai + 3) = RT * skew(cp.position - states[ai].position);
    }
    s.contact_gaps[c] = cp.gap;
    row += 3;
  }
  s.pre_velocity = s.jacobian * s.u_minus;
  return s;
}

VecX back_substitute(const AssembledStep& step, const VecX& lambda) {
  VecX rhs = step.dt * step.bias_force;
  if (lambda.size() > 0) rhs += step.jacobian.transpose() * lambda;
  VecX u = step.u_minus;
  for (int i = 0; i < step.num_bodies(); ++i) {
    u.segment<6>(6 * i) += step.mass_blocks[i].ldlt().solve(rhs.segment<6>(6 * i));
  }
  return u;
}

}  // namespace dualsim
