#pragma once

#include "dualsim/model.hpp"

#include <vector>

namespace dualsim {

// Composite cone: free joint rows, then nonnegative limit rows, then one
// Coulomb cone (t, o, n) per contact.
struct ConeSpec {
  std::vector<int> joint_dims;  // row count of each joint block
  int limit_rows = 0;
  std::vector<double> contact_mus;

  int joint_rows() const;
  int num_contacts() const { return static_cast<int>(contact_mus.size()); }
  int limit_offset() const { return joint_rows(); }
  int contact_offset(int k) const { return joint_rows() + limit_rows + 3 * k; }
  int num_rows() const { return joint_rows() + limit_rows + 3 * num_contacts(); }
};

struct StabilizationParams {
  double alpha_joint = 0.1;
  double beta_limit = 0.1;
  double gamma_contact = 0.1;
  double penetration_margin = 0.0;  // delta_c (m)
};

struct SofteningParams {
  double d0 = 0.9;
  double dw = 0.95;
  double width = 0.001;
  double midpoint = 0.5;
  double power = 2.0;
  double time_constant = 0.02;
  double damping_ratio = 1.0;

  void validate() const;
};

struct DualOptions {
  bool stabilize = false;
  StabilizationParams stabilization;
  bool soften = false;
  SofteningParams softening;
  bool restitution = true;
};

struct DualProblem {
  MatX delassus;
  VecX free_velocity;
  ConeSpec cone;
  VecX regularizer;      // diagonal of R; empty when not softened
  VecX regulation_bias;  // v_r; empty when not softened
  VecX pre_velocity;     // v-
  double dt = 0.0;
  double total_diag_inertia = 0.0;
  std::vector<ConstraintBlock> layout;

  int size() const { return static_cast<int>(free_velocity.size()); }
  bool softened() const { return regularizer.size() > 0; }
  // D + R and v_f + v_r; the plain terms when not softened.
  MatX effective_delassus() const;
  VecX effective_free_velocity() const;
};

// Shapes the row-wise impedance d from the residual.
double softening_impedance(double residual, const SofteningParams& p);

MatX delassus_matrix(const AssembledStep& step);

// Zero on joint and limit rows, (0, 0, mu |v_T|) on each contact.
VecX de_saxce_correction(const VecX& v, const ConeSpec& cone);

ConeSpec cone_from_step(const AssembledStep& step);

// Configuration residual per row: joint residuals, limit gaps, contact normal
// rows d_c + margin, zero on contact tangent rows.
VecX constraint_residuals(const AssembledStep& step, double penetration_margin);

VecX stabilization_bias(const AssembledStep& step, const StabilizationParams& params,
                        double dt);

struct SofteningTerms {
  VecX regularizer;
  VecX regulation_bias;
};

SofteningTerms softening_terms(const VecX& residuals, const VecX& delassus_diag,
                               const VecX& v_minus, const SofteningParams& params,
                               double dt);

DualProblem build_dual_problem(const AssembledStep& step, const DualOptions& options);

}  // namespace dualsim
