#include "dualsim/math.hpp"

#include <cmath>

namespace dualsim {

Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return S;
}

Quat quat_exp(const Vec3& phi) {
  const double angle = phi.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * phi.x(), 0.5 * phi.y(), 0.5 * phi.z());
    return q.normalized();
  }
  return Quat(Eigen::AngleAxisd(angle, phi / angle));
}

Vec3 so3_log(const Mat3& R) {
  Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

Mat3 so3_left_jacobian_inverse(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 P = skew(phi);
  double coeff;
  if (theta < 1e-6) {
    coeff = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    coeff = 1.0 / (theta * theta) -
            (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Mat3::Identity() - 0.5 * P + coeff * P * P;
}

Mat3 contact_frame_basis(const Vec3& normal) {
  const double len = normal.norm();
  if (!(len > 0.0) || !std::isfinite(len)) {
    throw Error("contact_frame_basis: zero or non-finite normal");
  }
  const Vec3 n = normal / len;
  // World axis least aligned with n, ties resolved toward x.
  int axis = 0;
  double best = std::abs(n.x());
  for (int i = 1; i < 3; ++i) {
    if (std::abs(n[i]) < best) {
      best = std::abs(n[i]);
      axis = i;
    }
  }
  Vec3 e = Vec3::Zero();
  e[axis] = 1.0;
  Vec3 t = e - e.dot(n) * n;
  t.normalize();
  const Vec3 o = n.cross(t);
  Mat3 R;
  R.col(0) = t;
  R.col(1) = o;
  R.col(2) = n;
  return R;
}

bool all_finite(const VecX& v) { return v.allFinite(); }

}  // namespace dualsim
