#pragma once

#include "dualsim/collision.hpp"
#include "dualsim/dual.hpp"
#include "dualsim/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dualsim {

// Body wrench interpolated linearly from w0 at t0 to w1 at t1, active on [t0, t1).
struct WrenchEvent {
  int body = 0;
  double t0 = 0.0;
  double t1 = 0.0;
  Vec6 w0 = Vec6::Zero();
  Vec6 w1 = Vec6::Zero();
};

struct Scenario {
  std::string id;
  SystemModel model;
  std::vector<BodyState> initial;
  std::vector<WrenchEvent> schedule;
  double duration = 1.0;
  double dt = 1e-3;
  CollisionConfig collision;

  ExternalInputs inputs_at(double t) const;
  void validate() const;
};

struct ScenarioOverrides {
  std::optional<double> dt;
  std::optional<double> duration;
  std::optional<double> friction;
  std::optional<double> restitution;
  std::optional<double> drop_height;        // gap of the lowest body's bottom face (m)
  std::optional<double> initial_speed;      // sphere_drop: downward speed (m/s)
  std::optional<std::vector<double>> masses;  // per body, in scenario order
  std::optional<double> push_time;          // fourbar push start (s)
  std::optional<double> push_duration;      // fourbar push length (s)
  std::optional<bool> disable_schedule;     // drop all external wrenches
  std::optional<bool> no_ground;            // remove the ground plane
  std::optional<double> margin;             // collision activation margin
};

// box_on_plane, boxes_fixed, nunchaku, fourbar_fixed, fourbar_free, sphere_drop.
std::vector<std::string> scenario_ids();
Scenario build_scenario(const std::string& id, const ScenarioOverrides& overrides = {});

// JSON scene description; see README for the schema.
Scenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const Scenario& scenario);
Scenario load_scene_file(const std::string& path);

}  // namespace dualsim
