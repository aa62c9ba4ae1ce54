#pragma once

#include "dualsim/dual.hpp"
#include "dualsim/projectors.hpp"

#include <string>
#include <vector>

namespace dualsim {

enum class Algorithm { kSplitting, kAdmm };
enum class LocalSolverKind { kCcp, kNcp, kNbQuartic, kNbBisection };
enum class Termination { kResiduals, kEarlyStop };
enum class ResidualMode { kNcp, kCcp };
enum class PenaltyMode { kFixed, kLinear, kSpectral };
enum class SolverStatus { kConverged, kMaxIter, kDiverged, kEmpty };

const char* to_string(SolverStatus s);

struct AdmmParams {
  bool ncp = true;  // false: CCP variant, no De Saxce estimate and no proximal term
  PenaltyMode penalty = PenaltyMode::kFixed;
  double rho0 = 1.0;
  double eta = 1e-6;
  double omega = 1.0;  // over-relaxation
  double alpha = 10.0;
  double tau_inc = 1.5;
  double tau_dec = 1.5;
  double tau0 = 0.2;
  double tau = 0.05;
  int power_iterations = 100;
};

struct SolverConfig {
  std::string name = "custom";
  Algorithm algorithm = Algorithm::kSplitting;
  LocalSolverKind local_solver = LocalSolverKind::kNbQuartic;
  bool de_saxce = false;
  Termination termination = Termination::kResiduals;
  ResidualMode residual_mode = ResidualMode::kNcp;
  int max_iterations = 10000;
  double eps_primal = 1e-12;
  double eps_dual = 1e-12;
  double eps_compl = 1e-12;
  double early_stop_tol = 1e-10;
  double omega0 = 1.0;
  double omega_min = 1.0;
  double omega_decay = 1.0;
  AdmmParams admm;
  BisectionConfig bisection;
  VecX warmstart_lambda;    // empty for a cold start
  VecX warmstart_velocity;  // post-event velocity paired with the warmstart

  void set_tolerance(double eps);
  void validate() const;
};

struct ResidualTriple {
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
};

struct SolverReport {
  VecX lambda;
  VecX v_plus;  // effective D lambda + effective free velocity
  SolverStatus status = SolverStatus::kEmpty;
  int iterations = 0;
  std::vector<ResidualTriple> residual_history;
  double solve_time = 0.0;
  double mean_iter_time = 0.0;
};

// Dual-solver identifiers: PGS-CCP, PGS-NCP, NBGS, RAISIM, RAISIM-DS,
// RAISIM-DS-ES, ADMM-CCP, ADMM-NCP-FP, ADMM-NCP-LA, ADMM-NCP-SA; ADMM-NCP is
// an alias of ADMM-NCP-FP.
enum class Precision { kHigh, kThroughput };
SolverConfig solver_preset(const std::string& id, Precision precision = Precision::kHigh);
std::vector<std::string> solver_ids();

ResidualTriple compute_residuals(const VecX& lambda, const VecX& v_plus,
                                 const ConeSpec& cone, ResidualMode mode);

// lambda - P_K(lambda - F(lambda)), F the (effective) post-event velocity,
// De Saxce-augmented in NCP mode.
VecX natural_map(const VecX& lambda, const DualProblem& problem, ResidualMode mode);

double early_stop_metric(double f_curr, double f_prev, double total_diag_inertia);

double spectral_radius_estimate(const MatX& D, int iterations);

// rho0 = sqrt(L eta) (L / eta)^tau0
double spectral_initial_penalty(double L, const AdmmParams& params);

double penalty_update(double rho, double r_p, double r_d, PenaltyMode mode,
                      const AdmmParams& params, double kappa);

SolverReport solve_splitting(const DualProblem& problem, const SolverConfig& config);
SolverReport solve_admm(const DualProblem& problem, const SolverConfig& config);
SolverReport solve(const DualProblem& problem, const SolverConfig& config);

}  // namespace dualsim
