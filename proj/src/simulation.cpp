#include "dualsim/simulation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace dualsim {

namespace {

bool same_layout(const std::vector<ConstraintBlock>& a, const std::vector<ConstraintBlock>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].kind != b[i].kind || a[i].rows != b[i].rows || a[i].index != b[i].index) {
      return false;
    }
  }
  return true;
}

VecX pd_actuation(const SystemModel& model, const std::vector<BodyState>& states,
                  const SimulationOptions& opt, VecX* prev_q, double dt) {
  int n = 0;
  for (const auto& j : model.joints) n += j.num_dofs();
  VecX q(n);
  int k = 0;
  for (const auto& j : model.joints) {
    const VecX c = joint_kinematics(j, states).dof_config;
    q.segment(k, c.size()) = c;
    k += static_cast<int>(c.size());
  }
  const VecX qd = prev_q->size() == n ? VecX((q - *prev_q) / dt) : VecX(VecX::Zero(n));
  *prev_q = q;
  return -opt.pd_stiffness * q - opt.pd_damping * qd;
}

StepRecord summarize(const StepContext& ctx, const std::vector<BodyState>& next,
                     bool warmstarted) {
  const AssembledStep& s = ctx.assembled;
  const SolverReport& rep = ctx.report;
  StepRecord r;
  r.step = ctx.step;
  r.time = ctx.time;
  r.status = rep.status;
  r.iterations = rep.iterations;
  r.warmstarted = warmstarted;
  r.n_contacts = s.num_contacts();
  r.n_limits = s.num_limits();
  r.n_rows = s.num_rows();
  r.r_pen = ctx.r_pen;
  r.solve_time = rep.solve_time;
  const ConeSpec& cone = ctx.problem.cone;
  for (int c = 0; c < cone.num_contacts() && rep.lambda.size() > 0; ++c) {
    const Vec3 l = rep.lambda.segment<3>(cone.contact_offset(c));
    r.normal_impulse += l.z();
    if (s.contacts[c].body_a == kWorld) {
      r.ground_vertical_impulse += (contact_frame_basis(s.contacts[c].normal) * l).z();
    }
  }
  const int nj = cone.joint_rows();
  if (nj > 0 && rep.lambda.size() > 0) r.joint_impulse = rep.lambda.head(nj).cwiseAbs().maxCoeff();
  if (rep.lambda.size() > 0) {
    const DualMetrics m = metric_set(rep.lambda, rep.v_plus, ctx.problem);
    r.r_dual = m.r_dual;
    r.r_ncp = m.r_ncp;
    r.r_nat = m.r_nat;
  }
  for (const auto& b : next) {
    r.positions.push_back(b.position);
    r.orientations.push_back(b.orientation);
  }
  return r;
}

}  // namespace

RunResult run_simulation(const Scenario& scenario, const SimulationOptions& options,
                         const StepCallback& callback) {
  scenario.validate();
  options.solver.validate();
  CollisionConfig coll = scenario.collision;
  if (options.min_separation) coll.min_separation = *options.min_separation;
  const bool pd = options.pd_stiffness != 0.0 || options.pd_damping != 0.0;

  const auto t_start = std::chrono::steady_clock::now();
  RunResult run;
  std::vector<BodyState> states = scenario.initial;
  const double dt = scenario.dt;
  const int n_steps = static_cast<int>(std::llround(scenario.duration / dt));
  std::vector<ConstraintBlock> prev_layout;
  VecX prev_lambda, prev_v, prev_q;
  bool have_prev = false;

  for (int k = 0; k < n_steps; ++k) {
    const double t = k * dt;
    const std::vector<ContactPoint> contacts = collide_scene(scenario.model, states, coll);
    ExternalInputs in = scenario.inputs_at(t);
    if (pd) in.actuation = pd_actuation(scenario.model, states, options, &prev_q, dt);
    const AssembledStep step = assemble_system(scenario.model, states, dt, in, contacts);
    const DualProblem problem = build_dual_problem(step, options.dual);

    SolverConfig cfg = options.solver;
    const bool warm = options.warmstart && have_prev && same_layout(prev_layout, step.layout);
    cfg.warmstart_lambda = warm ? prev_lambda : VecX();
    cfg.warmstart_velocity = warm ? prev_v : VecX();
    const SolverReport rep = solve(problem, cfg);
    const double r_pen =
        metric_penetration(step.joint_residuals, step.limit_residuals, step.contact_gaps);

    const bool diverged = rep.status == SolverStatus::kDiverged ||
                          (rep.lambda.size() > 0 && !rep.lambda.allFinite());
    std::vector<BodyState> next = states;
    if (!diverged) {
      const VecX u_plus = back_substitute(step, rep.lambda.size() ? rep.lambda : VecX::Zero(0));
      try {
        next = integrate_semi_implicit(states, u_plus, dt);
      } catch (const Error&) {
        run.halted = true;
      }
    } else {
      run.halted = true;
    }
    const StepContext ctx{k, t, states, step, problem, rep, r_pen};
    run.steps.push_back(summarize(ctx, next, warm));
    const bool go_on = callback ? callback(ctx) : true;
    if (run.halted) break;
    states = std::move(next);
    prev_layout = step.layout;
    prev_lambda = rep.lambda;
    prev_v = rep.v_plus;
    have_prev = true;
    if (!go_on) {
      run.stopped = true;
      break;
    }
  }
  run.final_state = states;
  run.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return run;
}

void write_time_series_csv(std::ostream& os, const Scenario& scenario, const RunResult& run) {
  os << "step,time,status,iterations,warmstarted,n_contacts,n_limits,n_rows,"
        "normal_impulse,ground_vertical_impulse,joint_impulse,r_pen,r_dual,r_ncp,r_nat,"
        "solve_time";
  for (int b = 0; b < scenario.model.num_bodies(); ++b) {
    for (const char* c : {"x", "y", "z", "qx", "qy", "qz", "qw"}) os << ",b" << b << '_' << c;
  }
  os << '\n' << std::setprecision(17);
  for (const auto& r : run.steps) {
    os << r.step << ',' << r.time << ',' << to_string(r.status) << ',' << r.iterations << ','
       << (r.warmstarted ? 1 : 0) << ',' << r.n_contacts << ',' << r.n_limits << ','
       << r.n_rows << ',' << r.normal_impulse << ',' << r.ground_vertical_impulse << ','
       << r.joint_impulse << ',' << r.r_pen << ',' << r.r_dual << ',' << r.r_ncp << ','
       << r.r_nat << ',' << r.solve_time;
    for (size_t b = 0; b < r.positions.size(); ++b) {
      const Vec3& p = r.positions[b];
      const Quat& q = r.orientations[b];
      os << ',' << p.x() << ',' << p.y() << ',' << p.z() << ',' << q.x() << ',' << q.y() << ','
         << q.z() << ',' << q.w();
    }
    os << '\n';
  }
}

std::string run_manifest_json(const Scenario& scenario, const SimulationOptions& options,
                              const RunResult& run) {
  nlohmann::json m;
  m["scenario"] = scenario.id;
  m["dt"] = scenario.dt;
  m["duration"] = scenario.duration;
  m["bodies"] = scenario.model.num_bodies();
  m["joints"] = scenario.model.joints.size();
  const SolverConfig& s = options.solver;
  m["solver"] = {{"name", s.name},
                 {"max_iterations", s.max_iterations},
                 {"eps_primal", s.eps_primal},
                 {"eps_dual", s.eps_dual},
                 {"eps_compl", s.eps_compl}};
  const auto& st = options.dual.stabilization;
  m["stabilize"] = options.dual.stabilize;
  m["stabilization"] = {{"alpha", st.alpha_joint},
                        {"beta", st.beta_limit},
                        {"gamma", st.gamma_contact},
                        {"margin", st.penetration_margin}};
  m["soften"] = options.dual.soften;
  m["restitution"] = options.dual.restitution;
  m["warmstart"] = options.warmstart;
  m["collision_margin"] = scenario.collision.margin;
  int converged = 0, iters = 0;
  double solve_time = 0.0, pen = 0.0;
  for (const auto& r : run.steps) {
    converged += r.status == SolverStatus::kConverged;
    iters += r.iterations;
    solve_time += r.solve_time;
    pen += r.r_pen;
  }
  m["steps"] = run.steps.size();
  m["converged_steps"] = converged;
  m["total_iterations"] = iters;
  m["total_solve_time"] = solve_time;
  m["mean_r_pen"] = run.steps.empty() ? 0.0 : pen / static_cast<double>(run.steps.size());
  m["halted"] = run.halted;
  m["wall_time"] = run.wall_time;
  m["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                       std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION);
  return m.dump(2);
}

void write_run_outputs(const std::string& dir, const Scenario& scenario,
                       const SimulationOptions& options, const RunResult& run) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(std::filesystem::path(dir) / "timeseries.csv");
  if (!csv) throw Error("cannot write time series in '" + dir + "'");
  write_time_series_csv(csv, scenario, run);
  std::ofstream man(std::filesystem::path(dir) / "manifest.json");
  if (!man) throw Error("cannot write manifest in '" + dir + "'");
  man << run_manifest_json(scenario, options, run) << '\n';
}

namespace {

std::string normalize_key(std::string s) {
  for (char& c : s) c = c == ' ' || c == '-' ? '_' : static_cast<char>(std::tolower(c));
  return s;
}

}  // namespace

BucketSpec parse_buckets(const std::string& spec) {
  BucketSpec out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.rfind(':');
    if (colon == std::string::npos) throw Error("bucket '" + item + "' lacks ':<size>'");
    const std::string key = normalize_key(item.substr(0, colon));
    int size = 0;
    try {
      size = std::stoi(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error("bucket '" + item + "' has a bad size");
    }
    if (size < 0) throw Error("bucket sizes must be nonnegative");
    bool found = false;
    for (SampleCategory c : all_categories()) {
      if (normalize_key(to_string(c)) == key) {
        out[c] = size;
        found = true;
      }
    }
    if (!found) throw Error("unknown bucket category '" + item.substr(0, colon) + "'");
  }
  return out;
}

std::vector<ProblemSample> capture_dataset(const std::vector<CaptureRun>& runs,
                                           const BucketSpec& buckets) {
  std::vector<ProblemSample> out;
  std::map<SampleCategory, int> filled;
  auto full = [&]() {
    for (const auto& [c, n] : buckets) {
      if (filled[c] < n) return false;
    }
    return true;
  };
  for (const auto& run : runs) {
    if (full()) break;
    run_simulation(run.scenario, run.options, [&](const StepContext& ctx) {
      if (ctx.problem.size() == 0) return !full();
      ProblemSample s = make_sample(ctx.assembled, ctx.problem);
      const auto it = buckets.find(s.category);
      if (it != buckets.end() && filled[s.category] < it->second) {
        ++filled[s.category];
        out.push_back(std::move(s));
      }
      return !full();
    });
  }
  return out;
}

}  // namespace dualsim
