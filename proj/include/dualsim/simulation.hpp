#pragma once

#include "dualsim/bench.hpp"
#include "dualsim/scenarios.hpp"
#include "dualsim/solvers.hpp"

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dualsim {

struct SimulationOptions {
  SolverConfig solver;
  DualOptions dual;
  bool warmstart = true;
  std::optional<double> min_separation;
  // Joint PD toward zero on every free coordinate; disabled when both are 0.
  double pd_stiffness = 0.0;
  double pd_damping = 0.0;
};

// Everything known about a step once the solver returned.
struct StepContext {
  int step = 0;
  double time = 0.0;
  const std::vector<BodyState>& states;
  const AssembledStep& assembled;
  const DualProblem& problem;
  const SolverReport& report;
  double r_pen = 0.0;
};

// Return false to stop the run after this step.
using StepCallback = std::function<bool(const StepContext&)>;

struct StepRecord {
  int step = 0;
  double time = 0.0;
  SolverStatus status = SolverStatus::kEmpty;
  int iterations = 0;
  bool warmstarted = false;
  int n_contacts = 0;
  int n_limits = 0;
  int n_rows = 0;
  double normal_impulse = 0.0;         // sum of contact normal impulses
  double ground_vertical_impulse = 0.0;  // world z impulse from world contacts
  double joint_impulse = 0.0;          // max abs joint multiplier
  double r_pen = 0.0;
  double r_dual = 0.0;
  double r_ncp = 0.0;
  double r_nat = 0.0;
  double solve_time = 0.0;
  std::vector<Vec3> positions;  // after integration
  std::vector<Quat> orientations;
};

struct RunResult {
  std::vector<StepRecord> steps;
  std::vector<BodyState> final_state;
  bool halted = false;  // solver divergence
  bool stopped = false;  // callback asked to stop
  double wall_time = 0.0;
};

RunResult run_simulation(const Scenario& scenario, const SimulationOptions& options,
                         const StepCallback& callback = {});

void write_time_series_csv(std::ostream& os, const Scenario& scenario, const RunResult& run);
std::string run_manifest_json(const Scenario& scenario, const SimulationOptions& options,
                              const RunResult& run);
// Writes <dir>/timeseries.csv and <dir>/manifest.json.
void write_run_outputs(const std::string& dir, const Scenario& scenario,
                       const SimulationOptions& options, const RunResult& run);

using BucketSpec = std::map<SampleCategory, int>;

// "dense_contacts:5,dense_joints:10"; category names as in to_string.
BucketSpec parse_buckets(const std::string& spec);

struct CaptureRun {
  Scenario scenario;
  SimulationOptions options;
};

// Fills each bucket first-come across the runs, in order.
std::vector<ProblemSample> capture_dataset(const std::vector<CaptureRun>& runs,
                                           const BucketSpec& buckets);

}  // namespace dualsim
