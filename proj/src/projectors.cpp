#include "dualsim/projectors.hpp"

#include <algorithm>
#include <cmath>

namespace dualsim {

namespace {

// Points within this relative distance of a boundary count as inside, which
// keeps every projection idempotent under rounding.
constexpr double kBoundaryTol = 1e-15;

Vec3 project_scaled_cone(const Vec3& x, double mu) {
  const double t = std::hypot(x[0], x[1]);
  const double n = x[2];
  const double scale = kBoundaryTol * std::max(1.0, x.cwiseAbs().maxCoeff());
  if (t - mu * n <= scale * (1.0 + mu)) return x;
  if (mu * t + n <= 0.0) return Vec3::Zero();
  const double alpha = (mu * t + n) / (1.0 + mu * mu);
  Vec3 out;
  out[0] = mu * alpha * x[0] / t;
  out[1] = mu * alpha * x[1] / t;
  out[2] = alpha;
  return out;
}

}  // namespace

double project_orthant(double x) { return x > 0.0 ? x : 0.0; }

Vec2 project_disk(const Vec2& x, double radius) {
  if (radius < 0.0) throw Error("project_disk: negative radius");
  const double len = x.norm();
  if (len <= radius * (1.0 + kBoundaryTol)) return x;
  return (radius / len) * x;
}

Vec3 project_lorentz(const Vec3& x) { return project_scaled_cone(x, 1.0); }

Vec3 project_coulomb(const Vec3& x, double mu) {
  if (mu < 0.0) throw Error("project_coulomb: negative friction coefficient");
  if (mu == 0.0) return Vec3(0.0, 0.0, project_orthant(x[2]));
  return project_scaled_cone(x, mu);
}

Vec3 project_dual_coulomb(const Vec3& x, double mu) {
  if (mu < 0.0) throw Error("project_dual_coulomb: negative friction coefficient");
  if (mu == 0.0) return Vec3(x[0], x[1], project_orthant(x[2]));
  return project_scaled_cone(x, 1.0 / mu);
}

bool in_coulomb_cone(const Vec3& x, double mu, double tol) {
  return x[2] >= -tol && std::hypot(x[0], x[1]) <= mu * x[2] + tol;
}

VecX project_cone(const VecX& x, const ConeSpec& cone) {
  VecX y = x;
  const int lo = cone.limit_offset();
  for (int l = 0; l < cone.limit_rows; ++l) y[lo + l] = project_orthant(x[lo + l]);
  for (int k = 0; k < cone.num_contacts(); ++k) {
    const int o = cone.contact_offset(k);
    y.segment<3>(o) = project_coulomb(x.segment<3>(o), cone.contact_mus[k]);
  }
  return y;
}

VecX project_dual_cone(const VecX& x, const ConeSpec& cone) {
  VecX y = x;
  y.head(cone.joint_rows()).setZero();
  const int lo = cone.limit_offset();
  for (int l = 0; l < cone.limit_rows; ++l) y[lo + l] = project_orthant(x[lo + l]);
  for (int k = 0; k < cone.num_contacts(); ++k) {
    const int o = cone.contact_offset(k);
    y.segment<3>(o) = project_dual_coulomb(x.segment<3>(o), cone.contact_mus[k]);
  }
  return y;
}

Vec3 local_ccp(const LocalContactProblem& p, const Vec3& lambda_in) {
  const double tr = p.D.trace();
  if (!(tr > 0.0)) throw Error("local_ccp: trace of D must be positive");
  const Vec3 z = p.D * lambda_in + p.v + p.s;
  return project_coulomb(lambda_in - (3.0 / tr) * z, p.mu);
}

Vec3 local_ncp(const LocalContactProblem& p, const Vec3& lambda_in) {
  const Vec3 z = p.D * lambda_in + p.v + p.s;
  Vec3 out;
  out[2] = project_orthant(lambda_in[2] - z[2] / p.D(2, 2));
  const double step = 1.0 / std::min(p.D(0, 0), p.D(1, 1));
  const Vec2 t = lambda_in.head<2>() - step * z.head<2>();
  out.head<2>() = project_disk(t, p.mu * out[2]);
  return out;
}

}  // namespace dualsim
