// Command-line front end: simulate, solve, capture, profile, scene.

#include "dualsim/bench.hpp"
#include "dualsim/scenarios.hpp"
#include "dualsim/simulation.hpp"
#include "dualsim/solvers.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

using namespace dualsim;
using nlohmann::json;

namespace {

int fail(const std::string& command, const std::string& message, int code = 1) {
  std::cerr << json{{"status", "error"}, {"command", command}, {"error", message}}.dump()
            << std::endl;
  return code;
}

struct SolverArgs {
  std::vector<std::string> ids;
  std::optional<int> nmax;
  std::optional<double> eps;
  bool throughput = false;

  void add(CLI::App* app, bool many) {
    if (many) {
      app->add_option("--solver", ids, "Solver ids (default: all)");
    } else {
      app->add_option("--solver", ids, "Solver id")->required()->expected(1);
    }
    app->add_option("--nmax", nmax, "Maximum iterations");
    app->add_option("--eps", eps, "Absolute tolerance on all residuals");
    app->add_flag("--throughput", throughput, "Use the 1e-6 / 1e3 preset");
  }

  SolverConfig config(const std::string& id) const {
    SolverConfig c = solver_preset(id, throughput ? Precision::kThroughput : Precision::kHigh);
    if (nmax) c.max_iterations = *nmax;
    if (eps) c.set_tolerance(*eps);
    c.validate();
    return c;
  }
};

struct DualArgs {
  bool stabilize = false;
  bool soften = false;
  bool no_restitution = false;
  std::optional<double> erp_joint, erp_limit, erp_contact, pen_margin;

  void add(CLI::App* app) {
    app->add_flag("--stabilize", stabilize, "Enable constraint stabilization");
    app->add_flag("--soften", soften, "Enable constraint softening");
    app->add_flag("--no-restitution", no_restitution, "Ignore restitution coefficients");
    app->add_option("--erp-joint", erp_joint, "Joint stabilization gain");
    app->add_option("--erp-limit", erp_limit, "Limit stabilization gain");
    app->add_option("--erp-contact", erp_contact, "Contact stabilization gain");
    app->add_option("--penetration-margin", pen_margin, "Allowed penetration (m)");
  }

  DualOptions options() const {
    DualOptions d;
    d.stabilize = stabilize;
    d.soften = soften;
    d.restitution = !no_restitution;
    if (erp_joint) d.stabilization.alpha_joint = *erp_joint;
    if (erp_limit) d.stabilization.beta_limit = *erp_limit;
    if (erp_contact) d.stabilization.gamma_contact = *erp_contact;
    if (pen_margin) d.stabilization.penetration_margin = *pen_margin;
    return d;
  }
};

struct SceneArgs {
  std::string id;
  std::string file;
  ScenarioOverrides o;
  std::optional<double> friction, restitution, drop, speed, margin, dt, duration;
  std::vector<double> masses;
  bool no_schedule = false;

  void add(CLI::App* app) {
    app->add_option("--scenario", id, "Built-in scenario id");
    app->add_option("--scene", file, "Scene JSON file");
    app->add_option("--dt", dt, "Time step (s)");
    app->add_option("--duration", duration, "Simulated time (s)");
    app->add_option("--friction", friction, "Friction coefficient");
    app->add_option("--restitution", restitution, "Restitution coefficient");
    app->add_option("--drop-height", drop, "Gap below the lowest body (m)");
    app->add_option("--initial-speed", speed, "sphere_drop downward speed (m/s)");
    app->add_option("--margin", margin, "Collision activation margin (m)");
    app->add_option("--masses", masses, "Per-body masses")->delimiter(',');
    app->add_flag("--no-schedule", no_schedule, "Drop scheduled wrenches");
  }

  Scenario build() const {
    if (id.empty() == file.empty()) throw Error("give exactly one of --scenario or --scene");
    ScenarioOverrides ov;
    ov.dt = dt;
    ov.duration = duration;
    ov.friction = friction;
    ov.restitution = restitution;
    ov.drop_height = drop;
    ov.initial_speed = speed;
    ov.margin = margin;
    if (!masses.empty()) ov.masses = masses;
    if (no_schedule) ov.disable_schedule = true;
    if (!id.empty()) return build_scenario(id, ov);
    Scenario sc = load_scene_file(file);
    if (dt) sc.dt = *dt;
    if (duration) sc.duration = *duration;
    if (friction) sc.model.friction = *friction;
    if (restitution) sc.model.restitution = *restitution;
    if (margin) sc.collision.margin = *margin;
    if (no_schedule) sc.schedule.clear();
    sc.validate();
    return sc;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-problem rigid-body dynamics toolkit"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Run a scenario and write a time series");
  SceneArgs sim_scene;
  SolverArgs sim_solver;
  DualArgs sim_dual;
  std::string sim_out;
  std::optional<double> sim_min_sep;
  bool sim_cold = false;
  sim_scene.add(sim);
  sim_solver.add(sim, false);
  sim_dual.add(sim);
  sim->add_option("--min-separation", sim_min_sep, "Contact culling radius (m)");
  sim->add_flag("--no-warmstart", sim_cold, "Always cold start");
  sim->add_option("--out", sim_out, "Output directory");

  auto* slv = app.add_subcommand("solve", "Solve every problem of a dataset");
  std::string slv_data, slv_out;
  SolverArgs slv_solver;
  slv->add_option("--dataset", slv_data, "Sample file")->required();
  slv->add_option("--out", slv_out, "Metrics CSV")->required();
  slv_solver.add(slv, true);

  auto* cap = app.add_subcommand("capture", "Capture dual problems into a dataset");
  std::vector<std::string> cap_ids;
  std::string cap_buckets, cap_out, cap_solver = "ADMM-NCP";
  std::optional<double> cap_duration;
  DualArgs cap_dual;
  cap->add_option("--scenario", cap_ids, "Scenario ids, run in order")->required();
  cap->add_option("--buckets", cap_buckets, "e.g. dense_contacts:5,dense_joints:10")->required();
  cap->add_option("--out", cap_out, "Sample file")->required();
  cap->add_option("--solver", cap_solver, "Solver used to advance the runs");
  cap->add_option("--duration", cap_duration, "Simulated time per run (s)");
  cap_dual.add(cap);

  auto* prof = app.add_subcommand("profile", "Performance profiles from metric CSVs");
  std::vector<std::string> prof_in;
  std::string prof_metric, prof_out;
  double prof_rmax = 1e6;
  int prof_points = 200;
  prof->add_option("--metrics", prof_in, "Metric CSV files")->required();
  prof->add_option("--metric", prof_metric, "r_pen, r_dual, r_ncp, r_nat, i_stop, t_solve, t_iter")
      ->required();
  prof->add_option("--out", prof_out, "Profile CSV")->required();
  prof->add_option("--rmax", prof_rmax, "Ratio cap r_M");
  prof->add_option("--points", prof_points, "Grid points");

  auto* scn = app.add_subcommand("scene", "Write a built-in scenario as scene JSON");
  SceneArgs scn_scene;
  std::string scn_out;
  scn_scene.add(scn);
  scn->add_option("--out", scn_out, "Scene JSON file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("parse", e.what(), 2);
  }

  std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*sim) {
      const Scenario sc = sim_scene.build();
      SimulationOptions opt;
      opt.solver = sim_solver.config(sim_solver.ids.front());
      opt.dual = sim_dual.options();
      opt.min_separation = sim_min_sep;
      opt.warmstart = !sim_cold;
      const RunResult run = run_simulation(sc, opt);
      if (!sim_out.empty()) write_run_outputs(sim_out, sc, opt, run);
      std::cout << run_manifest_json(sc, opt, run) << std::endl;
      return run.halted ? 3 : 0;
    }
    if (*slv) {
      const std::vector<ProblemSample> data = read_samples(slv_data);
      std::vector<std::string> ids = slv_solver.ids.empty() ? solver_ids() : slv_solver.ids;
      std::vector<MetricsRecord> recs;
      for (size_t p = 0; p < data.size(); ++p) {
        const DualProblem problem = problem_from_sample(data[p]);
        for (const auto& id : ids) {
          const SolverReport rep = solve(problem, slv_solver.config(id));
          recs.push_back(make_record("p" + std::to_string(p), id, rep, problem, 0.0));
        }
      }
      std::ofstream os(slv_out);
      if (!os) throw Error("cannot write '" + slv_out + "'");
      write_metrics_csv(os, recs);
      std::cout << json{{"status", "ok"}, {"problems", data.size()}, {"records", recs.size()}}
                       .dump()
                << std::endl;
      return 0;
    }
    if (*cap) {
      const BucketSpec buckets = parse_buckets(cap_buckets);
      std::vector<CaptureRun> runs;
      for (const auto& id : cap_ids) {
        ScenarioOverrides ov;
        ov.duration = cap_duration;
        CaptureRun r{build_scenario(id, ov), {}};
        r.options.solver = solver_preset(cap_solver, Precision::kThroughput);
        r.options.dual = cap_dual.options();
        runs.push_back(std::move(r));
      }
      const std::vector<ProblemSample> samples = capture_dataset(runs, buckets);
      write_samples(cap_out, samples);
      json counts = json::object();
      for (const auto& s : samples) counts[to_string(s.category)] = counts.value(to_string(s.category), 0) + 1;
      std::cout << json{{"status", "ok"}, {"samples", samples.size()}, {"categories", counts}}
                       .dump()
                << std::endl;
      return 0;
    }
    if (*prof) {
      std::vector<MetricsRecord> recs;
      for (const auto& path : prof_in) {
        std::ifstream is(path);
        if (!is) throw Error("cannot open '" + path + "'");
        const auto r = read_metrics_csv(is);
        recs.insert(recs.end(), r.begin(), r.end());
      }
      const auto curves = performance_profiles(recs, metric_field_from_string(prof_metric),
                                               prof_rmax, prof_points);
      std::ofstream os(prof_out);
      if (!os) throw Error("cannot write '" + prof_out + "'");
      write_profiles_csv(os, curves);
      json solved = json::object();
      for (const auto& c : curves) solved[c.solver] = c.solved_fraction;
      std::cout << json{{"status", "ok"}, {"solved_fraction", solved}}.dump() << std::endl;
      return 0;
    }
    if (*scn) {
      const std::string text = scenario_to_json(scn_scene.build());
      if (scn_out.empty()) {
        std::cout << text << std::endl;
      } else {
        std::ofstream os(scn_out);
        if (!os) throw Error("cannot write '" + scn_out + "'");
        os << text << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    return fail(command, e.what());
  }
  return fail(command, "no command");
}
