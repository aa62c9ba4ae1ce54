#pragma once

#include "dualsim/dual.hpp"
#include "dualsim/solvers.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace dualsim {

enum class SampleCategory {
  kIndependentJoints,
  kRedundantJoints,
  kDenseJoints,
  kSingleContact,
  kSparseContacts,
  kDenseContacts,
  kDenseConstraints,
};

const char* to_string(SampleCategory c);
SampleCategory category_from_string(const std::string& s);
std::vector<SampleCategory> all_categories();

struct ProblemSample {
  MatX delassus;
  VecX free_velocity;
  std::vector<double> mus;
  double dt = 0.0;
  int n_b = 0;
  int n_j = 0;
  int n_l = 0;
  int n_c = 0;
  std::vector<int> joint_dims;
  std::vector<int> joint_offsets;
  std::vector<int> limit_offsets;
  SampleCategory category = SampleCategory::kIndependentJoints;
  int jacobian_rank = 0;
  double mass_ratio = 1.0;

  bool operator==(const ProblemSample& o) const;
  void validate() const;
};

// Sample of an assembled, dualized step; the category is computed here.
ProblemSample make_sample(const AssembledStep& step, const DualProblem& problem,
                          double rank_tol = 1e-10);

// Plain dual problem (no augmentations beyond what v_f already holds).
DualProblem problem_from_sample(const ProblemSample& sample);

int jacobian_rank(const MatX& J, double rank_tol = 1e-10);

SampleCategory categorize_sample(const ProblemSample& sample);

struct MetricsRecord {
  std::string problem;
  std::string solver;
  SolverStatus status = SolverStatus::kEmpty;
  double r_pen = 0.0;
  double r_dual = 0.0;
  double r_ncp = 0.0;
  double r_nat = 0.0;
  int i_stop = 0;
  double t_solve = 0.0;
  double t_iter = 0.0;

  bool failed() const { return status != SolverStatus::kConverged; }
};

// Infinity norm of the configuration residuals; unilateral entries count
// only where negative.
double metric_penetration(const VecX& joint_res, const VecX& limit_res,
                          const VecX& contact_gaps);

struct DualMetrics {
  double r_dual = 0.0;
  double r_ncp = 0.0;
  double r_nat = 0.0;
};

// Always evaluated for the NCP.
DualMetrics metric_set(const VecX& lambda, const VecX& v_plus, const DualProblem& problem);

MetricsRecord make_record(const std::string& problem_id, const std::string& solver_id,
                          const SolverReport& report, const DualProblem& problem,
                          double r_pen);

enum class MetricField { kPen, kDual, kNcp, kNat, kIters, kSolveTime, kIterTime };
MetricField metric_field_from_string(const std::string& s);
double metric_value(const MetricsRecord& r, MetricField f);

struct ProfileCurve {
  std::string solver;
  std::vector<double> tau;
  std::vector<double> rho;
  double r_M = 1e6;
  double solved_fraction = 0.0;
};

// Value shift for metrics at or below machine precision.
double dingle_higham(double m);

std::vector<ProfileCurve> performance_profiles(const std::vector<MetricsRecord>& records,
                                               MetricField field, double r_M = 1e6,
                                               int grid_points = 200);

// Ratios r_{p,s} per problem (rows) and solver (columns) in sorted id order.
struct RatioTable {
  std::vector<std::string> problems;
  std::vector<std::string> solvers;
  std::vector<std::vector<double>> ratio;
};
RatioTable performance_ratios(const std::vector<MetricsRecord>& records, MetricField field,
                              double r_M = 1e6);

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_metrics_csv(std::istream& is);
void write_profiles_csv(std::ostream& os, const std::vector<ProfileCurve>& curves);

// Container: JSON text header line, then little-endian binary blocks.
void write_samples(const std::string& path, const std::vector<ProblemSample>& samples);
std::vector<ProblemSample> read_samples(const std::string& path);

}  // namespace dualsim
