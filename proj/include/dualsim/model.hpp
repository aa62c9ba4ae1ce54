#pragma once

#include "dualsim/math.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dualsim {

enum class ShapeKind { kSphere, kBox };

struct Shape {
  ShapeKind kind = ShapeKind::kBox;
  double radius = 0.0;              // sphere
  Vec3 half_extents = Vec3::Zero();  // box

  static Shape sphere(double r);
  static Shape box(const Vec3& half_extents);
};

struct BodySpec {
  std::string name;
  double mass = 1.0;
  Mat3 local_inertia = Mat3::Identity();
  Shape shape;

  // Solid sphere or box with uniform density.
  static BodySpec solid(const std::string& name, double mass, const Shape& s);
};

struct BodyState {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();  // world frame
};

// World-fixed half-space boundary: points x with normal.x >= offset are free.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
};

enum class JointKind { kFixed, kRevolute, kSpherical, kPrismatic };

struct JointLimit {
  int dof = 0;  // index into the joint's free coordinates
  double q_min = 0.0;
  double q_max = 0.0;
};

struct JointSpec {
  std::string name;
  JointKind kind = JointKind::kFixed;
  int base_body = kWorld;
  int follower_body = 0;
  Vec3 anchor_base = Vec3::Zero();      // base frame (world frame if base is WORLD)
  Vec3 anchor_follower = Vec3::Zero();  // follower frame
  Mat3 axes = Mat3::Identity();           // joint frame relative to the base
  Mat3 follower_axes = Mat3::Identity();  // joint frame relative to the follower
  std::vector<JointLimit> limits;

  // Rows of the 6D relative error (translation, rotation) that are constrained
  // and free, in joint-frame coordinates. Revolute and prismatic move along z.
  std::vector<int> constrained_dims() const;
  std::vector<int> free_dims() const;
  int num_constraints() const;
  int num_dofs() const;
  MatX constraint_selector() const;  // 6 x m_j
  MatX actuation_selector() const;   // 6 x d_j
};

struct SystemModel {
  std::vector<BodySpec> bodies;
  std::vector<JointSpec> joints;
  std::vector<Plane> planes;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  double friction = 0.7;
  double restitution = 0.0;

  int num_bodies() const { return static_cast<int>(bodies.size()); }
  void validate() const;
};

struct ContactPoint {
  int body_a = kWorld;
  int body_b = 0;
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double gap = 0.0;
  double friction = 0.7;
  double restitution = 0.0;
};

struct JointKinematics {
  Vec3 frame_position = Vec3::Zero();
  Mat3 frame_rotation = Mat3::Identity();
  Vec6 error = Vec6::Zero();  // full relative error in the base joint frame
  VecX residual;              // constrained components
  VecX dof_config;            // free components
};

enum class LimitSide { kMin, kMax };

struct LimitRecord {
  int joint = 0;
  int dof = 0;
  LimitSide side = LimitSide::kMin;
  double gap = 0.0;
  Vec6 selector = Vec6::Zero();
};

enum class ConstraintKind { kJoint, kLimit, kContact };

struct ConstraintBlock {
  ConstraintKind kind = ConstraintKind::kJoint;
  int index = 0;  // joint, limit or contact index
  int offset = 0;
  int rows = 0;
  double friction = 0.0;
  double restitution = 0.0;
};

struct AssembledStep {
  std::vector<Mat6> mass_blocks;  // per body, world frame
  VecX bias_force;                // 6 n_b
  MatX jacobian;                  // n_d x 6 n_b
  VecX u_minus;                   // 6 n_b
  VecX pre_velocity;              // J u-
  std::vector<ConstraintBlock> layout;
  VecX joint_residuals;
  VecX limit_residuals;
  VecX contact_gaps;
  std::vector<int> joint_dims;
  std::vector<ContactPoint> contacts;
  std::vector<LimitRecord> limits;
  double dt = 0.0;

  int num_bodies() const { return static_cast<int>(mass_blocks.size()); }
  int num_rows() const { return static_cast<int>(jacobian.rows()); }
  int num_joint_rows() const;
  int num_limits() const { return static_cast<int>(limits.size()); }
  int num_contacts() const { return static_cast<int>(contacts.size()); }
  MatX mass_matrix() const;
};

// Twist layout per body is (v, w), both in world coordinates.
VecX stack_velocities(const std::vector<BodyState>& states);

std::vector<BodyState> integrate_semi_implicit(
    const std::vector<BodyState>& states, const VecX& u_plus, double dt);

void body_mass_and_bias(const BodySpec& spec, const BodyState& state,
                        const Vec3& gravity, Mat6* M, Vec6* w_gc);

JointKinematics joint_kinematics(const JointSpec& joint,
                                 const std::vector<BodyState>& states);

// 6 x 6 n_b map from the stacked twist to the time derivative of the joint error.
MatX joint_error_jacobian(const JointSpec& joint,
                          const std::vector<BodyState>& states, int num_bodies);

std::vector<LimitRecord> detect_active_limits(
    const std::vector<JointSpec>& joints, const std::vector<BodyState>& states);

struct ExternalInputs {
  std::vector<Vec6> wrenches;  // per body (force, torque), world frame; may be empty
  VecX actuation;              // stacked over joint free coordinates; may be empty
};

AssembledStep assemble_system(const SystemModel& model,
                              const std::vector<BodyState>& states, double dt,
                              const ExternalInputs& inputs,
                              const std::vector<ContactPoint>& contacts);

// u+ = u- + M^-1 (dt h + J^T lambda)
VecX back_substitute(const AssembledStep& step, const VecX& lambda);

}  // namespace dualsim
