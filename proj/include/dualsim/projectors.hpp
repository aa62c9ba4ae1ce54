#pragma once

#include "dualsim/dual.hpp"
#include "dualsim/math.hpp"

namespace dualsim {

// Euclidean projections onto the cone primitives.
double project_orthant(double x);
Vec2 project_disk(const Vec2& x, double radius);
Vec3 project_lorentz(const Vec3& x);           // |x_t| <= x_n
Vec3 project_coulomb(const Vec3& x, double mu);  // |x_t| <= mu x_n
Vec3 project_dual_coulomb(const Vec3& x, double mu);  // |x_t| <= x_n / mu

// Composite cone K and its dual K*: joint rows are free (dual {0}), limits
// are nonnegative, contacts are Coulomb cones.
VecX project_cone(const VecX& x, const ConeSpec& cone);
VecX project_dual_cone(const VecX& x, const ConeSpec& cone);

bool in_coulomb_cone(const Vec3& x, double mu, double tol);

struct LocalContactProblem {
  Mat3 D = Mat3::Identity();
  Vec3 v = Vec3::Zero();  // free velocity plus off-block coupling
  double mu = 0.0;
  Vec3 s = Vec3::Zero();  // De Saxce estimate
};

Vec3 local_ccp(const LocalContactProblem& p, const Vec3& lambda_in);
Vec3 local_ncp(const LocalContactProblem& p, const Vec3& lambda_in);

struct ConicSection {
  Vec3 d_n = Vec3::Zero();  // normal row of D
  double v_fn = 0.0;
  double phi0 = 0.0;
  double dphi = 0.0;
  bool full_circle = true;
  double interval_lo = 0.0;  // feasible polar angles (interval_lo, interval_hi)
  double interval_hi = 0.0;
  double r_dmu = 0.0;  // inclination ratio; infinity for a circular section
};

ConicSection conic_decompose(const LocalContactProblem& p);

enum class LocalBranch { kOpen, kFrictionless, kSticking, kDegenerate, kSlipping };

struct BisectionConfig {
  int max_expansions = 64;
  double beta1 = 0.1;
  double beta2 = 1.5;
  double beta3 = 0.01;
  double eps = 1e-10;
  int scan_intervals = 128;
};

struct LocalSolution {
  Vec3 lambda = Vec3::Zero();
  LocalBranch branch = LocalBranch::kOpen;
  bool used_fallback = false;  // slipping root search fell back to a scan
};

LocalSolution local_nb_quartic_detailed(const LocalContactProblem& p);
LocalSolution local_nb_bisection_detailed(const LocalContactProblem& p,
                                          const BisectionConfig& config);

Vec3 local_nb_quartic(const LocalContactProblem& p);
Vec3 local_nb_bisection(const LocalContactProblem& p, const BisectionConfig& config = {});

}  // namespace dualsim
