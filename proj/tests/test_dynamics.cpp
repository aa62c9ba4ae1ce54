#include "dualsim/model.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dualsim;

namespace {

// Rodrigues formula written out element by element.
Mat3 rodrigues(const Vec3& axis, double angle) {
  const Vec3 k = axis.normalized();
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  Mat3 R;
  R << t * k.x() * k.x() + c, t * k.x() * k.y() - s * k.z(), t * k.x() * k.z() + s * k.y(),
      t * k.x() * k.y() + s * k.z(), t * k.y() * k.y() + c, t * k.y() * k.z() - s * k.x(),
      t * k.x() * k.z() - s * k.y(), t * k.y() * k.z() + s * k.x(), t * k.z() * k.z() + c;
  return R;
}

BodyState random_state(std::mt19937_64& rng) {
  BodyState s;
  s.position = oracle::random_vec3(rng);
  s.orientation = Quat(Eigen::Vector4d::Random()).normalized();
  s.linear_velocity = oracle::random_vec3(rng);
  s.angular_velocity = oracle::random_vec3(rng);
  return s;
}

}  // namespace

TEST_CASE("integrate: zero velocity leaves the state unchanged") {
  BodyState s;
  s.position = Vec3(1, 2, 3);
  s.orientation = Quat(Eigen::AngleAxisd(0.4, Vec3(1, 1, 0).normalized()));
  const auto out = integrate_semi_implicit({s}, VecX::Zero(6), 0.01);
  CHECK(out[0].position == s.position);
  CHECK(out[0].orientation.coeffs().isApprox(s.orientation.coeffs(), 1e-15));
}

TEST_CASE("integrate: pure translation") {
  VecX u = VecX::Zero(6);
  u[0] = 1.0;
  const auto out = integrate_semi_implicit({BodyState{}}, u, 0.5);
  CHECK(out[0].position.isApprox(Vec3(0.5, 0, 0)));
  CHECK(out[0].linear_velocity.isApprox(Vec3(1, 0, 0)));
}

TEST_CASE("integrate: rotation matches the Rodrigues formula") {
  VecX u = VecX::Zero(6);
  u[5] = oracle::kPi;
  const auto out = integrate_semi_implicit({BodyState{}}, u, 1.0);
  const Mat3 R = out[0].orientation.toRotationMatrix();
  CHECK((R - rodrigues(Vec3::UnitZ(), oracle::kPi)).cwiseAbs().maxCoeff() < 1e-12);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    BodyState s = random_state(rng);
    const Vec3 w = oracle::random_vec3(rng, 2.0);
    VecX v = VecX::Zero(6);
    v.tail<3>() = w;
    const auto o = integrate_semi_implicit({s}, v, 0.1);
    const Mat3 expect = rodrigues(w, 0.1 * w.norm()) * s.orientation.toRotationMatrix();
    CHECK((o[0].orientation.toRotationMatrix() - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(o[0].orientation.norm() - 1.0) < 1e-14);
  }
}

TEST_CASE("integrate: rejects bad input") {
  CHECK_THROWS_AS(integrate_semi_implicit({BodyState{}}, VecX::Zero(6), 0.0), Error);
  CHECK_THROWS_AS(integrate_semi_implicit({BodyState{}}, VecX::Zero(5), 0.1), Error);
  VecX u = VecX::Zero(6);
  u[2] = std::nan("");
  CHECK_THROWS_AS(integrate_semi_implicit({BodyState{}}, u, 0.1), Error);
}

TEST_CASE("mass and bias") {
  BodySpec b;
  b.mass = 1.0;
  b.local_inertia = Mat3::Identity();
  Mat6 M;
  Vec6 w;
  body_mass_and_bias(b, BodyState{}, Vec3(0, 0, -9.81), &M, &w);
  CHECK(M.isApprox(Mat6::Identity()));
  CHECK(w.isApprox((Vec6() << 0, 0, -9.81, 0, 0, 0).finished()));

  b.local_inertia = Vec3(1, 2, 3).asDiagonal();
  BodyState s;
  s.angular_velocity = Vec3(0, 0, 1);
  body_mass_and_bias(b, s, Vec3::Zero(), &M, &w);
  CHECK(w.tail<3>().norm() == doctest::Approx(0.0));

  s.angular_velocity = Vec3(1, 1, 0);
  body_mass_and_bias(b, s, Vec3::Zero(), &M, &w);
  // -(1,1,0) x (1,2,0) by hand.
  CHECK(w.tail<3>().isApprox(Vec3(0, 0, -1)));
}

TEST_CASE("mass matrix uses the world-frame inertia") {
  std::mt19937_64 rng(5);
  BodySpec b = BodySpec::solid("box", 2.0, Shape::box(Vec3(0.1, 0.2, 0.3)));
  BodyState s = random_state(rng);
  Mat6 M;
  Vec6 w;
  body_mass_and_bias(b, s, Vec3::Zero(), &M, &w);
  const Mat3 R = s.orientation.toRotationMatrix();
  CHECK((M.bottomRightCorner<3, 3>() - R * b.local_inertia * R.transpose()).norm() < 1e-12);
  CHECK(M.topLeftCorner<3, 3>().isApprox(2.0 * Mat3::Identity()));
}

TEST_CASE("solid inertia") {
  const BodySpec s = BodySpec::solid("s", 5.0, Shape::sphere(0.2));
  CHECK(s.local_inertia(0, 0) == doctest::Approx(0.4 * 5.0 * 0.04));
  const BodySpec b = BodySpec::solid("b", 12.0, Shape::box(Vec3(0.5, 1.0, 1.5)));
  CHECK(b.local_inertia(0, 0) == doctest::Approx(4.0 + 9.0));
  CHECK(b.local_inertia(1, 1) == doctest::Approx(1.0 + 9.0));
  CHECK(b.local_inertia(2, 2) == doctest::Approx(1.0 + 4.0));
}

TEST_CASE("contact frame basis") {
  CHECK(contact_frame_basis(Vec3::UnitZ()).isApprox(Mat3::Identity()));
  const Mat3 D = contact_frame_basis(-Vec3::UnitZ());
  CHECK(D.col(2).isApprox(-Vec3::UnitZ()));
  CHECK(D.determinant() == doctest::Approx(1.0));
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 n = oracle::random_vec3(rng).normalized();
    const Mat3 R = contact_frame_basis(n);
    CHECK((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((R.col(2) - n).norm() < 1e-12);
  }
}

TEST_CASE("so3 log inverts the exponential") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    Vec3 phi = oracle::random_vec3(rng);
    if (phi.norm() > 3.0) phi *= 3.0 / phi.norm();
    const Vec3 back = so3_log(quat_exp(phi).toRotationMatrix());
    CHECK((back - phi).norm() < 1e-9);
  }
  CHECK(so3_log(Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("joint kinematics") {
  JointSpec j;
  j.kind = JointKind::kSpherical;
  j.base_body = kWorld;
  j.follower_body = 0;
  j.anchor_base = Vec3(0, 0, 1);
  BodyState s;
  s.position = Vec3(0, 0, 1);

  SUBCASE("rest configuration") {
    const auto k = joint_kinematics(j, {s});
    CHECK(k.residual.norm() == 0.0);
  }
  SUBCASE("spherical translation error") {
    s.position.z() += 0.01;
    const auto k = joint_kinematics(j, {s});
    REQUIRE(k.residual.size() == 3);
    CHECK(k.residual.isApprox(Vec3(0, 0, 0.01)));
  }
  SUBCASE("revolute coordinate") {
    j.kind = JointKind::kRevolute;
    s.orientation = Quat(Eigen::AngleAxisd(0.3, Vec3::UnitZ()));
    const auto k = joint_kinematics(j, {s});
    REQUIRE(k.dof_config.size() == 1);
    // Angle read back from the quaternion components.
    const double angle = 2.0 * std::atan2(s.orientation.z(), s.orientation.w());
    CHECK(k.dof_config[0] == doctest::Approx(angle));
    CHECK(k.dof_config[0] == doctest::Approx(0.3));
    CHECK(k.residual.norm() < 1e-15);
  }
}

TEST_CASE("joint dimensions") {
  JointSpec j;
  j.kind = JointKind::kFixed;
  CHECK(j.num_constraints() == 6);
  j.kind = JointKind::kRevolute;
  CHECK(j.num_constraints() == 5);
  CHECK(j.num_dofs() == 1);
  j.kind = JointKind::kSpherical;
  CHECK(j.num_constraints() == 3);
  j.kind = JointKind::kPrismatic;
  CHECK(j.num_constraints() == 5);
  CHECK(j.actuation_selector().rows() == 6);
  CHECK(j.constraint_selector().cols() == 5);
}

TEST_CASE("joint error jacobian matches finite differences") {
  std::mt19937_64 rng(13);
  for (JointKind kind : {JointKind::kFixed, JointKind::kRevolute, JointKind::kSpherical,
                         JointKind::kPrismatic}) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<BodyState> st = {random_state(rng), random_state(rng)};
      JointSpec j;
      j.kind = kind;
      j.base_body = trial % 2 == 0 ? 0 : kWorld;
      j.follower_body = 1;
      j.anchor_base = oracle::random_vec3(rng, 0.3);
      j.anchor_follower = oracle::random_vec3(rng, 0.3);
      j.axes = quat_exp(oracle::random_vec3(rng)).toRotationMatrix();
      j.follower_axes = quat_exp(oracle::random_vec3(rng)).toRotationMatrix();
      // Keep the relative rotation well away from pi.
      const Mat3 Rb = j.base_body == kWorld ? Mat3::Identity()
                                            : st[0].orientation.toRotationMatrix();
      const Mat3 target = Rb * j.axes * quat_exp(oracle::random_vec3(rng, 0.5)).toRotationMatrix() *
                          j.follower_axes.transpose();
      st[1].orientation = Quat(target);

      const VecX u = stack_velocities(st);
      const MatX G = joint_error_jacobian(j, st, 2);
      const double h = 1e-6;
      const auto plus = integrate_semi_implicit(st, u, h);
      const auto minus = integrate_semi_implicit(st, -u, h);
      const Vec6 fd = (joint_kinematics(j, plus).error - joint_kinematics(j, minus).error) /
                      (2.0 * h);
      CHECK((G * u - fd).cwiseAbs().maxCoeff() < 1e-5 * (1.0 + fd.norm()));
    }
  }
}

TEST_CASE("active limits") {
  JointSpec j;
  j.kind = JointKind::kRevolute;
  j.limits = {{0, -oracle::kPi / 4, oracle::kPi / 4}};
  BodyState s;
  CHECK(detect_active_limits({j}, {s}).empty());

  s.orientation = Quat(Eigen::AngleAxisd(0.8, Vec3::UnitZ()));
  auto r = detect_active_limits({j}, {s});
  REQUIRE(r.size() == 1);
  CHECK(r[0].side == LimitSide::kMax);
  CHECK(r[0].gap == doctest::Approx(oracle::kPi / 4 - 0.8));
  CHECK(r[0].gap < 0.0);

  j.limits = {{0, 0.0, 1.0}};
  s.orientation = Quat::Identity();
  r = detect_active_limits({j}, {s});
  REQUIRE(r.size() == 1);
  CHECK(r[0].side == LimitSide::kMin);
  CHECK(r[0].gap == 0.0);
}

TEST_CASE("assembly without constraints") {
  SystemModel m;
  m.bodies.push_back(BodySpec::solid("b", 2.0, Shape::sphere(0.1)));
  const auto step = assemble_system(m, {BodyState{}}, 0.01, {}, {});
  CHECK(step.num_rows() == 0);
  CHECK(step.pre_velocity.size() == 0);
  CHECK(step.bias_force.head<3>().isApprox(Vec3(0, 0, -2.0 * 9.81)));
  CHECK(step.bias_force.tail<3>().norm() == 0.0);
}

TEST_CASE("assembly with a unary fixed joint") {
  SystemModel m;
  m.bodies.push_back(BodySpec::solid("b", 1.0, Shape::box(Vec3(0.1, 0.1, 0.1))));
  JointSpec j;
  j.kind = JointKind::kFixed;
  j.follower_body = 0;
  j.anchor_base = Vec3(0, 0, 1);
  m.joints.push_back(j);
  BodyState s;
  s.position = Vec3(0, 0, 1);
  const auto step = assemble_system(m, {s}, 0.01, {}, {});
  CHECK(step.num_rows() == 6);
  CHECK(step.joint_residuals.norm() == 0.0);
  CHECK(step.jacobian.isApprox(MatX::Identity(6, 6)));
  CHECK(step.pre_velocity.norm() == 0.0);
}

TEST_CASE("contact jacobian matches the point velocity") {
  std::mt19937_64 rng(17);
  SystemModel m;
  m.bodies.push_back(BodySpec::solid("a", 1.0, Shape::sphere(0.1)));
  m.bodies.push_back(BodySpec::solid("b", 1.0, Shape::sphere(0.1)));
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<BodyState> st = {random_state(rng), random_state(rng)};
    ContactPoint c;
    c.body_a = trial % 2 == 0 ? 0 : kWorld;
    c.body_b = 1;
    c.position = oracle::random_vec3(rng);
    c.normal = oracle::random_vec3(rng).normalized();
    const auto step = assemble_system(m, st, 0.01, {}, {c});
    // Relative velocity of the material points at the contact, in the contact frame.
    auto point_vel = [&](int b) {
      return Vec3(st[b].linear_velocity + st[b].angular_velocity.cross(c.position - st[b].position));
    };
    Vec3 rel = point_vel(1);
    if (c.body_a != kWorld) rel -= point_vel(0);
    const Vec3 expect = contact_frame_basis(c.normal).transpose() * rel;
    CHECK((step.pre_velocity - expect).norm() < 1e-12);
  }
}

TEST_CASE("assembly rejects mismatched inputs") {
  SystemModel m;
  m.bodies.push_back(BodySpec::solid("b", 1.0, Shape::sphere(0.1)));
  CHECK_THROWS_AS(assemble_system(m, {}, 0.01, {}, {}), Error);
  CHECK_THROWS_AS(assemble_system(m, {BodyState{}}, -1.0, {}, {}), Error);
  ContactPoint c;
  c.body_b = 3;
  CHECK_THROWS_AS(assemble_system(m, {BodyState{}}, 0.01, {}, {c}), Error);
}

TEST_CASE("back substitution solves the momentum balance") {
  std::mt19937_64 rng(19);
  SystemModel m;
  m.bodies.push_back(BodySpec::solid("a", 1.5, Shape::box(Vec3(0.1, 0.2, 0.3))));
  m.bodies.push_back(BodySpec::solid("b", 0.5, Shape::sphere(0.2)));
  std::vector<BodyState> st = {random_state(rng), random_state(rng)};
  JointSpec j;
  j.kind = JointKind::kSpherical;
  j.base_body = 0;
  j.follower_body = 1;
  m.joints.push_back(j);
  const auto step = assemble_system(m, st, 0.01, {}, {});
  const VecX lambda = VecX::Random(step.num_rows());
  const VecX u = back_substitute(step, lambda);
  const VecX r = step.mass_matrix() * (u - step.u_minus) - step.dt * step.bias_force -
                 step.jacobian.transpose() * lambda;
  CHECK(r.cwiseAbs().maxCoeff() < 1e-12);
}
