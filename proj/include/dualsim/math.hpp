#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace dualsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
// Hamilton convention; Eigen stores coefficients as (x, y, z, w).
using Quat = Eigen::Quaterniond;

// Index used for the immutable, infinite-mass world frame.
inline constexpr int kWorld = -1;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Mat3 skew(const Vec3& v);

// Unit quaternion of the rotation vector phi.
Quat quat_exp(const Vec3& phi);

// Rotation vector of R, angle in [0, pi].
Vec3 so3_log(const Mat3& R);

// Inverse of the left Jacobian of SO(3) at phi.
Mat3 so3_left_jacobian_inverse(const Vec3& phi);

// Right-handed rotation whose third column is n.
Mat3 contact_frame_basis(const Vec3& normal);

bool all_finite(const VecX& v);

}  // namespace dualsim
