#include "dualsim/scenarios.hpp"
#include "dualsim/simulation.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dualsim;

namespace {

SimulationOptions options(const std::string& solver,
                          Precision precision = Precision::kThroughput) {
  SimulationOptions o;
  o.solver = solver_preset(solver, precision);
  return o;
}

}  // namespace

TEST_CASE("built-in scenarios") {
  for (const auto& id : scenario_ids()) {
    const Scenario sc = build_scenario(id);
    CHECK(sc.id == id);
    CHECK_NOTHROW(sc.validate());
  }
  CHECK_THROWS_AS(build_scenario("walker"), Error);

  const Scenario box = build_scenario("box_on_plane");
  REQUIRE(box.model.num_bodies() == 1);
  CHECK(box.model.bodies[0].mass == 1.0);
  CHECK(box.model.bodies[0].shape.half_extents == Vec3::Constant(0.1));
  CHECK(box.model.friction == 0.7);

  const Scenario boxes = build_scenario("boxes_fixed");
  REQUIRE(boxes.model.num_bodies() == 2);
  const double m0 = boxes.model.bodies[0].mass, m1 = boxes.model.bodies[1].mass;
  CHECK(std::max(m0, m1) / std::min(m0, m1) == doctest::Approx(1e4));

  const Scenario fb = build_scenario("fourbar_fixed");
  CHECK(fb.model.num_bodies() == 4);
  CHECK(fb.model.joints.size() == 5);
  int rows = 0;
  for (const auto& j : fb.model.joints) rows += j.num_constraints();
  CHECK(rows == 26);
  CHECK(build_scenario("fourbar_free").model.joints.size() == 4);
}

TEST_CASE("overrides") {
  ScenarioOverrides o;
  o.friction = 0.2;
  o.dt = 0.002;
  o.duration = 0.1;
  o.masses = std::vector<double>{3.0};
  o.drop_height = 0.05;
  const Scenario sc = build_scenario("box_on_plane", o);
  CHECK(sc.model.friction == 0.2);
  CHECK(sc.dt == 0.002);
  CHECK(sc.model.bodies[0].mass == 3.0);
  CHECK(sc.initial[0].position.z() == doctest::Approx(0.15));
  o.masses = std::vector<double>{1.0, 2.0};
  CHECK_THROWS_AS(build_scenario("box_on_plane", o), Error);
  ScenarioOverrides bad;
  bad.dt = -1.0;
  CHECK_THROWS_AS(build_scenario("sphere_drop", bad), Error);
}

TEST_CASE("schedule interpolation") {
  const Scenario sc = build_scenario("box_on_plane");
  CHECK(sc.inputs_at(1.0).wrenches[0].norm() == 0.0);
  const double f_mid = sc.inputs_at(5.0).wrenches[0][0];
  const double f_max = 2.0 * 0.7 * 9.81;
  CHECK(f_mid == doctest::Approx(0.5 * f_max));
  ScenarioOverrides o;
  o.disable_schedule = true;
  CHECK(build_scenario("box_on_plane", o).schedule.empty());
}

TEST_CASE("scene JSON round trip") {
  for (const auto& id : scenario_ids()) {
    const Scenario a = build_scenario(id);
    const std::string text = scenario_to_json(a);
    const Scenario b = scenario_from_json(text);
    CHECK(scenario_to_json(b) == text);
    CHECK(b.model.num_bodies() == a.model.num_bodies());
    CHECK(b.model.joints.size() == a.model.joints.size());
    for (int i = 0; i < a.model.num_bodies(); ++i) {
      CHECK((b.initial[i].position - a.initial[i].position).norm() == 0.0);
      CHECK(b.model.bodies[i].local_inertia == a.model.bodies[i].local_inertia);
    }
  }
}

TEST_CASE("scene JSON errors") {
  CHECK_THROWS_AS(scenario_from_json("{"), Error);
  CHECK_THROWS_AS(scenario_from_json("{\"bodies\": [{\"mass\": -1}]}"), Error);
  const std::string bad_joint =
      R"({"bodies": [{"mass": 1, "shape": {"sphere": 0.1}}],
          "joints": [{"kind": "helical", "base": "world", "follower": 0}]})";
  CHECK_THROWS_AS(scenario_from_json(bad_joint), Error);
  CHECK_THROWS_AS(load_scene_file("/nonexistent/scene.json"), Error);
  const std::string ok = R"({"id": "mini", "dt": 0.01, "duration": 0.05,
      "bodies": [{"mass": 2, "shape": {"box": [0.1, 0.1, 0.1]}, "position": [0, 0, 0.1]}],
      "planes": [{"normal": [0, 0, 1], "offset": 0}]})";
  const Scenario sc = scenario_from_json(ok);
  CHECK(sc.model.bodies[0].mass == 2.0);
  CHECK(sc.model.planes.size() == 1);
}

TEST_CASE("resting box stays put") {
  ScenarioOverrides o;
  o.duration = 0.3;
  const Scenario sc = build_scenario("box_on_plane", o);
  for (const char* id : {"NBGS", "ADMM-NCP"}) {
    const RunResult run = run_simulation(sc, options(id, Precision::kHigh));
    REQUIRE(run.steps.size() == 300);
    CHECK_FALSE(run.halted);
    for (const auto& r : run.steps) {
      CHECK(r.normal_impulse == doctest::Approx(9.81 * sc.dt).epsilon(1e-6));
    }
    CHECK((run.final_state[0].position - sc.initial[0].position).norm() < 1e-3);
  }
}

TEST_CASE("momentum balance holds on every step") {
  ScenarioOverrides o;
  o.duration = 0.3;
  o.push_time = 0.1;
  const Scenario sc = build_scenario("fourbar_free", o);
  run_simulation(sc, options("NBGS"), [](const StepContext& c) {
    if (c.report.lambda.size() == 0) return true;
    const auto& s = c.assembled;
    const VecX u = back_substitute(s, c.report.lambda);
    const VecX h = s.bias_force;
    const VecX r = s.mass_matrix() * (u - s.u_minus) - s.dt * h -
                   s.jacobian.transpose() * c.report.lambda;
    CHECK(r.cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, h.norm()));
    return true;
  });
}

TEST_CASE("sphere restitution") {
  ScenarioOverrides o;
  o.restitution = 0.5;
  o.initial_speed = 2.0;
  const Scenario sc = build_scenario("sphere_drop", o);
  double pre = 0.0, post = 0.0;
  bool seen = false;
  run_simulation(sc, options("NBGS", Precision::kHigh), [&](const StepContext& c) {
    if (!seen && c.assembled.num_contacts() > 0 && c.assembled.pre_velocity[2] < 0.0) {
      seen = true;
      pre = -c.assembled.pre_velocity[2];
      // v_plus carries the folded restitution term; use the physical velocity.
      const VecX u_plus = back_substitute(c.assembled, c.report.lambda);
      post = (c.assembled.jacobian * u_plus)[2];
      return false;
    }
    return true;
  });
  REQUIRE(seen);
  CHECK(post == doctest::Approx(0.5 * pre).epsilon(0.02));
}

TEST_CASE("callback can stop a run") {
  const Scenario sc = build_scenario("sphere_drop");
  const RunResult run =
      run_simulation(sc, options("NBGS"), [](const StepContext& c) { return c.step < 4; });
  CHECK(run.stopped);
  CHECK(run.steps.size() == 5);
}

TEST_CASE("warm starts only reuse matching layouts") {
  ScenarioOverrides o;
  o.duration = 0.05;
  const Scenario sc = build_scenario("box_on_plane", o);
  const RunResult warm = run_simulation(sc, options("NBGS"));
  CHECK_FALSE(warm.steps[0].warmstarted);
  CHECK(warm.steps[1].warmstarted);
  SimulationOptions cold = options("NBGS");
  cold.warmstart = false;
  for (const auto& r : run_simulation(sc, cold).steps) CHECK_FALSE(r.warmstarted);
}

TEST_CASE("time series and manifest") {
  ScenarioOverrides o;
  o.duration = 0.02;
  const Scenario sc = build_scenario("nunchaku", o);
  const SimulationOptions opt = options("ADMM-NCP");
  const RunResult run = run_simulation(sc, opt);
  std::stringstream ss;
  write_time_series_csv(ss, sc, run);
  std::string header;
  std::getline(ss, header);
  CHECK(header.rfind("step,time,status,iterations", 0) == 0);
  CHECK(header.find("b2_qw") != std::string::npos);
  int lines = 0;
  for (std::string l; std::getline(ss, l);) ++lines;
  CHECK(lines == 20);

  const auto m = nlohmann::json::parse(run_manifest_json(sc, opt, run));
  CHECK(m["scenario"] == "nunchaku");
  CHECK(m["steps"] == 20);
  CHECK(m["solver"]["name"] == "ADMM-NCP-FP");

  const auto dir = std::filesystem::temp_directory_path() / "dualsim_test_run";
  write_run_outputs(dir.string(), sc, opt, run);
  CHECK(std::filesystem::exists(dir / "timeseries.csv"));
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("bucket parsing") {
  const BucketSpec b = parse_buckets("dense_contacts:5,Dense Joints:2");
  CHECK(b.at(SampleCategory::kDenseContacts) == 5);
  CHECK(b.at(SampleCategory::kDenseJoints) == 2);
  CHECK_THROWS_AS(parse_buckets("dense_contacts"), Error);
  CHECK_THROWS_AS(parse_buckets("bogus:1"), Error);
  CHECK_THROWS_AS(parse_buckets("single_contact:x"), Error);
  CHECK_THROWS_AS(parse_buckets("single_contact:-1"), Error);
}

TEST_CASE("capture") {
  ScenarioOverrides o;
  o.duration = 0.05;
  CaptureRun box{build_scenario("box_on_plane", o), options("NBGS")};

  CHECK(capture_dataset({box}, parse_buckets("dense_contacts:0")).empty());

  const auto samples = capture_dataset({box}, parse_buckets("dense_contacts:5"));
  REQUIRE(samples.size() == 5);
  for (const auto& s : samples) {
    CHECK(s.n_c == 4);
    CHECK(s.n_b == 1);
    CHECK(s.category == SampleCategory::kDenseContacts);
  }

  // The welded fourbar only yields joint samples; the free one lands on the
  // plane at about 0.14 s and adds contacts.
  ScenarioOverrides f;
  f.duration = 0.3;
  CaptureRun fixed{build_scenario("fourbar_fixed", f), options("ADMM-NCP")};
  CaptureRun free{build_scenario("fourbar_free", f), options("ADMM-NCP")};
  const auto mixed =
      capture_dataset({fixed, free}, parse_buckets("dense_joints:3,dense_constraints:3"));
  int joints = 0, constraints = 0;
  for (const auto& s : mixed) {
    joints += s.category == SampleCategory::kDenseJoints;
    constraints += s.category == SampleCategory::kDenseConstraints;
  }
  CHECK(joints == 3);
  CHECK(constraints == 3);
}
