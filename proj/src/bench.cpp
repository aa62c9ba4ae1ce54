#include "dualsim/bench.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace dualsim {

const char* to_string(SampleCategory c) {
  switch (c) {
    case SampleCategory::kIndependentJoints: return "Independent Joints";
    case SampleCategory::kRedundantJoints: return "Redundant Joints";
    case SampleCategory::kDenseJoints: return "Dense Joints";
    case SampleCategory::kSingleContact: return "Single Contact";
    case SampleCategory::kSparseContacts: return "Sparse Contacts";
    case SampleCategory::kDenseContacts: return "Dense Contacts";
    case SampleCategory::kDenseConstraints: return "Dense Constraints";
  }
  return "unknown";
}

std::vector<SampleCategory> all_categories() {
  return {SampleCategory::kIndependentJoints, SampleCategory::kRedundantJoints,
          SampleCategory::kDenseJoints,       SampleCategory::kSingleContact,
          SampleCategory::kSparseContacts,    SampleCategory::kDenseContacts,
          SampleCategory::kDenseConstraints};
}

SampleCategory category_from_string(const std::string& s) {
  for (SampleCategory c : all_categories()) {
    if (s == to_string(c)) return c;
  }
  throw Error("unknown sample category '" + s + "'");
}

bool ProblemSample::operator==(const ProblemSample& o) const {
  return delassus.rows() == o.delassus.rows() && delassus.cols() == o.delassus.cols() &&
         delassus == o.delassus && free_velocity.size() == o.free_velocity.size() &&
         free_velocity == o.free_velocity && mus == o.mus && dt == o.dt && n_b == o.n_b &&
         n_j == o.n_j && n_l == o.n_l && n_c == o.n_c && joint_dims == o.joint_dims &&
         joint_offsets == o.joint_offsets && limit_offsets == o.limit_offsets &&
         category == o.category && jacobian_rank == o.jacobian_rank &&
         mass_ratio == o.mass_ratio;
}

void ProblemSample::validate() const {
  const int n = static_cast<int>(free_velocity.size());
  if (delassus.rows() != n || delassus.cols() != n) throw Error("sample: dimension mismatch");
  if (static_cast<int>(mus.size()) != n_c || static_cast<int>(joint_dims.size()) != n_j ||
      static_cast<int>(joint_offsets.size()) != n_j ||
      static_cast<int>(limit_offsets.size()) != n_l) {
    throw Error("sample: inconsistent counts");
  }
  int rows = 3 * n_c + n_l;
  for (int d : joint_dims) rows += d;
  if (rows != n) throw Error("sample: row count mismatch");
  auto increasing = [](const std::vector<int>& v) {
    for (size_t i = 1; i < v.size(); ++i) {
      if (v[i] <= v[i - 1]) return false;
    }
    return true;
  };
  if (!increasing(joint_offsets) || !increasing(limit_offsets)) {
    throw Error("sample: offsets must be strictly increasing");
  }
}

int jacobian_rank(const MatX& J, double rank_tol) {
  if (J.rows() == 0 || J.cols() == 0) return 0;
  Eigen::JacobiSVD<MatX> svd(J);
  const VecX& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  int r = 0;
  for (int i = 0; i < s.size(); ++i) {
    if (s[i] > rank_tol * s[0]) ++r;
  }
  return r;
}

SampleCategory categorize_sample(const ProblemSample& s) {
  int n_jd = 0;
  for (int d : s.joint_dims) n_jd += d;
  const double n_bd = 6.0 * s.n_b;
  const double d_j = n_bd > 0.0 ? n_jd / n_bd : 0.0;
  const double d_c = n_bd > 0.0 ? 3.0 * s.n_c / n_bd : 0.0;
  const double d_jlc = n_bd > 0.0 ? s.free_velocity.size() / n_bd : 0.0;
  if (s.n_c == 0 && s.n_j >= 1) {
    if (s.jacobian_rank >= n_jd) return SampleCategory::kIndependentJoints;
    return d_j < 1.0 ? SampleCategory::kRedundantJoints : SampleCategory::kDenseJoints;
  }
  // Tested before the contact rules: those overlap it completely, so a strict
  // listed-order match would never produce this category.
  if (s.n_c >= 1 && s.n_j >= 1 && d_jlc > 1.0) return SampleCategory::kDenseConstraints;
  if (s.n_c == 1) return SampleCategory::kSingleContact;
  if (s.n_c >= 2 && s.n_c <= 2 * s.n_b) return SampleCategory::kSparseContacts;
  if (s.n_c > 2 * s.n_b && d_c > 1.0) return SampleCategory::kDenseContacts;
  // Only reachable without constraints at all.
  return SampleCategory::kIndependentJoints;
}

ProblemSample make_sample(const AssembledStep& step, const DualProblem& problem,
                          double rank_tol) {
  ProblemSample s;
  s.delassus = problem.delassus;
  s.free_velocity = problem.effective_free_velocity();
  if (problem.softened()) s.delassus = problem.effective_delassus();
  s.mus = problem.cone.contact_mus;
  s.dt = problem.dt;
  s.n_b = step.num_bodies();
  s.n_j = static_cast<int>(problem.cone.joint_dims.size());
  s.n_l = problem.cone.limit_rows;
  s.n_c = problem.cone.num_contacts();
  s.joint_dims = problem.cone.joint_dims;
  int off = 0;
  for (int d : s.joint_dims) {
    s.joint_offsets.push_back(off);
    off += d;
  }
  for (int l = 0; l < s.n_l; ++l) s.limit_offsets.push_back(off + l);
  s.jacobian_rank = jacobian_rank(step.jacobian, rank_tol);
  double m_max = 0.0, m_min = std::numeric_limits<double>::infinity();
  for (const Mat6& M : step.mass_blocks) {
    m_max = std::max(m_max, M(0, 0));
    m_min = std::min(m_min, M(0, 0));
  }
  s.mass_ratio = step.num_bodies() > 0 ? m_max / m_min : 1.0;
  s.category = categorize_sample(s);
  return s;
}

DualProblem problem_from_sample(const ProblemSample& s) {
  s.validate();
  DualProblem p;
  p.delassus = s.delassus;
  p.free_velocity = s.free_velocity;
  p.cone.joint_dims = s.joint_dims;
  p.cone.limit_rows = s.n_l;
  p.cone.contact_mus = s.mus;
  p.dt = s.dt;
  p.total_diag_inertia = std::max(1.0, s.delassus.trace());
  p.pre_velocity = VecX::Zero(s.free_velocity.size());
  return p;
}

double metric_penetration(const VecX& joint_res, const VecX& limit_res,
                          const VecX& contact_gaps) {
  double r = joint_res.size() ? joint_res.cwiseAbs().maxCoeff() : 0.0;
  for (int i = 0; i < limit_res.size(); ++i) r = std::max(r, -std::min(0.0, limit_res[i]));
  for (int i = 0; i < contact_gaps.size(); ++i) {
    r = std::max(r, -std::min(0.0, contact_gaps[i]));
  }
  return r;
}

DualMetrics metric_set(const VecX& lambda, const VecX& v_plus, const DualProblem& problem) {
  DualMetrics m;
  if (lambda.size() == 0) return m;
  const ResidualTriple r = compute_residuals(lambda, v_plus, problem.cone, ResidualMode::kNcp);
  m.r_dual = r.dual;
  m.r_ncp = r.complementarity;
  const VecX nat = natural_map(lambda, problem, ResidualMode::kNcp);
  m.r_nat = nat.cwiseAbs().maxCoeff();
  return m;
}

MetricsRecord make_record(const std::string& problem_id, const std::string& solver_id,
                          const SolverReport& report, const DualProblem& problem,
                          double r_pen) {
  MetricsRecord r;
  r.problem = problem_id;
  r.solver = solver_id;
  r.status = report.status;
  r.r_pen = r_pen;
  const DualMetrics m = metric_set(report.lambda, report.v_plus, problem);
  r.r_dual = m.r_dual;
  r.r_ncp = m.r_ncp;
  r.r_nat = m.r_nat;
  r.i_stop = report.iterations;
  r.t_solve = report.solve_time;
  r.t_iter = report.mean_iter_time;
  return r;
}

MetricField metric_field_from_string(const std::string& s) {
  if (s == "r_pen") return MetricField::kPen;
  if (s == "r_dual") return MetricField::kDual;
  if (s == "r_ncp") return MetricField::kNcp;
  if (s == "r_nat") return MetricField::kNat;
  if (s == "i_stop") return MetricField::kIters;
  if (s == "t_solve") return MetricField::kSolveTime;
  if (s == "t_iter") return MetricField::kIterTime;
  throw Error("unknown metric '" + s + "'");
}

double metric_value(const MetricsRecord& r, MetricField f) {
  switch (f) {
    case MetricField::kPen: return r.r_pen;
    case MetricField::kDual: return r.r_dual;
    case MetricField::kNcp: return r.r_ncp;
    case MetricField::kNat: return r.r_nat;
    case MetricField::kIters: return r.i_stop;
    case MetricField::kSolveTime: return r.t_solve;
    case MetricField::kIterTime: return r.t_iter;
  }
  return 0.0;
}

double dingle_higham(double m) {
  const double eps = std::numeric_limits<double>::epsilon();
  const double m_max = 0.5 * eps;
  const double m_min = 1e-2 * eps;
  if (m > m_min) return m;
  return m * (m_max - m_min) / m_min + m_min;
}

RatioTable performance_ratios(const std::vector<MetricsRecord>& records, MetricField field,
                              double r_M) {
  std::map<std::string, std::map<std::string, const MetricsRecord*>> grid;
  std::map<std::string, int> solver_set;
  for (const auto& r : records) {
    if (grid[r.problem].count(r.solver)) {
      throw Error("performance profiles: duplicate cell (" + r.problem + ", " + r.solver + ")");
    }
    grid[r.problem][r.solver] = &r;
    solver_set[r.solver] = 0;
  }
  RatioTable t;
  for (const auto& s : solver_set) t.solvers.push_back(s.first);
  for (const auto& [problem, row] : grid) {
    if (row.size() != t.solvers.size()) {
      throw Error("performance profiles: missing cells for problem '" + problem + "'");
    }
    t.problems.push_back(problem);
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> vals;
    for (const auto& s : t.solvers) {
      const MetricsRecord* rec = row.at(s);
      const double v = dingle_higham(std::max(0.0, metric_value(*rec, field)));
      vals.push_back(rec->failed() ? std::numeric_limits<double>::infinity() : v);
      if (!rec->failed()) best = std::min(best, v);
    }
    std::vector<double> ratios;
    for (double v : vals) {
      // Failures sit beyond r_M so that rho(r_M) is the solved fraction.
      if (!std::isfinite(v)) {
        ratios.push_back(std::numeric_limits<double>::infinity());
      } else {
        ratios.push_back(std::min(r_M, v / best));
      }
    }
    t.ratio.push_back(ratios);
  }
  return t;
}

std::vector<ProfileCurve> performance_profiles(const std::vector<MetricsRecord>& records,
                                               MetricField field, double r_M,
                                               int grid_points) {
  if (grid_points < 2) throw Error("performance profiles: need at least two grid points");
  const RatioTable t = performance_ratios(records, field, r_M);
  std::vector<double> tau(grid_points);
  const double log_max = std::log10(r_M);
  for (int i = 0; i < grid_points; ++i) {
    tau[i] = std::pow(10.0, log_max * i / (grid_points - 1));
  }
  tau.front() = 1.0;
  tau.back() = r_M;
  std::vector<ProfileCurve> out;
  const double np = static_cast<double>(t.problems.size());
  for (size_t s = 0; s < t.solvers.size(); ++s) {
    ProfileCurve c;
    c.solver = t.solvers[s];
    c.tau = tau;
    c.r_M = r_M;
    int solved = 0;
    for (const auto& row : t.ratio) solved += std::isfinite(row[s]) ? 1 : 0;
    c.solved_fraction = np > 0 ? solved / np : 0.0;
    for (double tv : tau) {
      int count = 0;
      for (const auto& row : t.ratio) count += row[s] <= tv ? 1 : 0;
      c.rho.push_back(np > 0 ? count / np : 0.0);
    }
    out.push_back(c);
  }
  return out;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRecord>& records) {
  os << "problem,solver,status,r_pen,r_dual,r_ncp,r_nat,i_stop,t_solve,t_iter\n";
  os << std::setprecision(17);
  for (const auto& r : records) {
    os << r.problem << ',' << r.solver << ',' << to_string(r.status) << ',' << r.r_pen << ','
       << r.r_dual << ',' << r.r_ncp << ',' << r.r_nat << ',' << r.i_stop << ','
       << r.t_solve << ',' << r.t_iter << '\n';
  }
}

namespace {

SolverStatus status_from_string(const std::string& s) {
  if (s == "converged") return SolverStatus::kConverged;
  if (s == "max_iter") return SolverStatus::kMaxIter;
  if (s == "diverged") return SolverStatus::kDiverged;
  if (s == "empty") return SolverStatus::kEmpty;
  throw Error("unknown status '" + s + "'");
}

}  // namespace

std::vector<MetricsRecord> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error("metrics csv: missing header");
  if (line != "problem,solver,status,r_pen,r_dual,r_ncp,r_nat,i_stop,t_solve,t_iter") {
    throw Error("metrics csv: unexpected header");
  }
  std::vector<MetricsRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw Error("metrics csv: malformed row '" + line + "'");
    MetricsRecord r;
    r.problem = f[0];
    r.solver = f[1];
    r.status = status_from_string(f[2]);
    r.r_pen = std::stod(f[3]);
    r.r_dual = std::stod(f[4]);
    r.r_ncp = std::stod(f[5]);
    r.r_nat = std::stod(f[6]);
    r.i_stop = std::stoi(f[7]);
    r.t_solve = std::stod(f[8]);
    r.t_iter = std::stod(f[9]);
    out.push_back(r);
  }
  return out;
}

void write_profiles_csv(std::ostream& os, const std::vector<ProfileCurve>& curves) {
  os << "tau";
  for (const auto& c : curves) os << ',' << c.solver;
  os << '\n' << std::setprecision(17);
  if (curves.empty()) return;
  for (size_t i = 0; i < curves.front().tau.size(); ++i) {
    os << curves.front().tau[i];
    for (const auto& c : curves) os << ',' << c.rho[i];
    os << '\n';
  }
}

}  // namespace dualsim
