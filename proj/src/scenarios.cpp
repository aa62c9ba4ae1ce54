#include "dualsim/scenarios.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace dualsim {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kG = 9.81;

double lowest_point(const BodySpec& b, const BodyState& s) {
  if (b.shape.kind == ShapeKind::kSphere) return s.position.z() - b.shape.radius;
  const Mat3 R = s.orientation.toRotationMatrix();
  return s.position.z() - b.shape.half_extents.dot(R.row(2).transpose().cwiseAbs());
}

void set_drop_height(const SystemModel& m, std::vector<BodyState>* states, double gap) {
  double low = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < states->size(); ++i) low = std::min(low, lowest_point(m.bodies[i], (*states)[i]));
  for (auto& s : *states) s.position.z() += gap - low;
}

BodyState at(const Vec3& p) {
  BodyState s;
  s.position = p;
  return s;
}

WrenchEvent force_event(int body, double t0, double t1, const Vec3& f0, const Vec3& f1) {
  WrenchEvent e;
  e.body = body;
  e.t0 = t0;
  e.t1 = t1;
  e.w0.head<3>() = f0;
  e.w1.head<3>() = f1;
  return e;
}

// Joint frame whose z axis is the world x axis.
Mat3 x_axis_frame() {
  Mat3 X;
  X.col(0) = Vec3::UnitY();
  X.col(1) = Vec3::UnitZ();
  X.col(2) = Vec3::UnitX();
  return X;
}

// Joint at a world point between bodies in their initial poses.
JointSpec joint_at(const std::string& name, JointKind kind, int base, int follower,
                   const std::vector<BodyState>& s, const Vec3& world_point,
                   const Mat3& world_axes) {
  JointSpec j;
  j.name = name;
  j.kind = kind;
  j.base_body = base;
  j.follower_body = follower;
  if (base == kWorld) {
    j.anchor_base = world_point;
    j.axes = world_axes;
  } else {
    const Mat3 Rb = s[base].orientation.toRotationMatrix();
    j.anchor_base = Rb.transpose() * (world_point - s[base].position);
    j.axes = Rb.transpose() * world_axes;
  }
  const Mat3 Rf = s[follower].orientation.toRotationMatrix();
  j.anchor_follower = Rf.transpose() * (world_point - s[follower].position);
  j.follower_axes = Rf.transpose() * world_axes;
  return j;
}

Scenario box_on_plane() {
  Scenario sc;
  sc.id = "box_on_plane";
  sc.model.bodies.push_back(BodySpec::solid("box", 1.0, Shape::box(Vec3::Constant(0.1))));
  sc.model.planes.push_back(Plane{});
  sc.initial.push_back(at(Vec3(0.0, 0.0, 0.1)));
  sc.duration = 10.0;
  return sc;
}

void box_on_plane_schedule(Scenario* sc) {
  const double m = sc->model.bodies[0].mass;
  const double f_max = 2.0 * sc->model.friction * m * kG;
  sc->schedule.push_back(force_event(0, 2.0, 8.0, Vec3::Zero(), Vec3(f_max, 0.0, 0.0)));
}

Scenario boxes_fixed() {
  Scenario sc;
  sc.id = "boxes_fixed";
  const Vec3 h = Vec3::Constant(0.1);
  sc.model.bodies.push_back(BodySpec::solid("bottom", 0.1, Shape::box(h)));
  sc.model.bodies.push_back(BodySpec::solid("top", 1000.0, Shape::box(h)));
  sc.model.planes.push_back(Plane{});
  sc.initial.push_back(at(Vec3(0.0, 0.0, 0.1)));
  sc.initial.push_back(at(Vec3(0.0, 0.0, 0.3)));
  sc.model.joints.push_back(joint_at("weld", JointKind::kFixed, 0, 1, sc.initial,
                                     Vec3(0.0, 0.0, 0.2), Mat3::Identity()));
  sc.collision.exclude(0, 1);
  sc.duration = 12.0;
  return sc;
}

void boxes_fixed_schedule(Scenario* sc) {
  double total = 0.0;
  for (const auto& b : sc->model.bodies) total += b.mass;
  const double f = 1.01 * sc->model.friction * total * kG;
  sc->schedule.push_back(force_event(0, 2.0, 4.0, Vec3::Zero(), Vec3(f, 0.0, 0.0)));
  sc->schedule.push_back(force_event(0, 4.0, 10.0, Vec3(f, 0.0, 0.0), Vec3(f, 0.0, 0.0)));
}

Scenario nunchaku() {
  Scenario sc;
  sc.id = "nunchaku";
  const Vec3 h(0.05, 0.05, 0.25);
  const double r = 0.05;
  sc.model.bodies.push_back(BodySpec::solid("lower", 1.0, Shape::box(h)));
  sc.model.bodies.push_back(BodySpec::solid("link", 1.0, Shape::sphere(r)));
  sc.model.bodies.push_back(BodySpec::solid("upper", 1.0, Shape::box(h)));
  sc.model.planes.push_back(Plane{});
  // Vertically stacked; the upper box leans slightly so the chain folds.
  sc.initial.push_back(at(Vec3(0.0, 0.0, 0.25)));
  sc.initial.push_back(at(Vec3(0.0, 0.0, 0.5 + r)));
  const double tilt = 0.05;
  BodyState up;
  up.orientation = Quat(Eigen::AngleAxisd(tilt, Vec3::UnitX()));
  up.position = Vec3(0.0, 0.0, 0.5 + 2.0 * r) + up.orientation * Vec3(0.0, 0.0, 0.25);
  sc.initial.push_back(up);
  sc.model.joints.push_back(joint_at("lower_link", JointKind::kSpherical, 0, 1, sc.initial,
                                     Vec3(0.0, 0.0, 0.5), Mat3::Identity()));
  sc.model.joints.push_back(joint_at("link_upper", JointKind::kSpherical, 1, 2, sc.initial,
                                     Vec3(0.0, 0.0, 0.5 + 2.0 * r), Mat3::Identity()));
  sc.collision.exclude(0, 1);
  sc.collision.exclude(1, 2);
  sc.duration = 5.0;
  return sc;
}

Scenario fourbar(bool fixed) {
  Scenario sc;
  sc.id = fixed ? "fourbar_fixed" : "fourbar_free";
  const double L = 0.1, t = 0.005;
  auto& B = sc.model.bodies;
  B.push_back(BodySpec::solid("base", 1.0, Shape::box(Vec3(t, 0.5 * L, t))));
  B.push_back(BodySpec::solid("left", 1.0, Shape::box(Vec3(t, t, 0.5 * L))));
  B.push_back(BodySpec::solid("right", 1.0, Shape::box(Vec3(t, t, 0.5 * L))));
  B.push_back(BodySpec::solid("top", 1.0, Shape::box(Vec3(t, 0.5 * L, t))));
  sc.model.planes.push_back(Plane{});
  const double z0 = 0.0;
  sc.initial.push_back(at(Vec3(0.0, 0.0, z0)));
  sc.initial.push_back(at(Vec3(0.0, -0.5 * L, z0 + 0.5 * L)));
  sc.initial.push_back(at(Vec3(0.0, 0.5 * L, z0 + 0.5 * L)));
  sc.initial.push_back(at(Vec3(0.0, 0.0, z0 + L)));
  const Mat3 X = x_axis_frame();
  auto& J = sc.model.joints;
  J.push_back(joint_at("base_left", JointKind::kRevolute, 0, 1, sc.initial,
                       Vec3(0.0, -0.5 * L, z0), X));
  J.push_back(joint_at("left_top", JointKind::kRevolute, 1, 3, sc.initial,
                       Vec3(0.0, -0.5 * L, z0 + L), X));
  J.push_back(joint_at("top_right", JointKind::kRevolute, 3, 2, sc.initial,
                       Vec3(0.0, 0.5 * L, z0 + L), X));
  J.push_back(joint_at("right_base", JointKind::kRevolute, 2, 0, sc.initial,
                       Vec3(0.0, 0.5 * L, z0), X));
  for (auto& j : J) j.limits.push_back(JointLimit{0, -0.25 * kPi, 0.25 * kPi});
  sc.collision.exclude(0, 1);
  sc.collision.exclude(1, 3);
  sc.collision.exclude(3, 2);
  sc.collision.exclude(2, 0);
  sc.duration = 12.0;
  return sc;
}

void fourbar_schedule(Scenario* sc, double t_push, double length) {
  double total = 0.0;
  for (const auto& b : sc->model.bodies) total += b.mass;
  const Vec3 f(0.0, -total * kG, 0.0);
  sc->schedule.push_back(force_event(3, t_push, t_push + length, f, f));
}

Scenario sphere_drop(const ScenarioOverrides& o) {
  Scenario sc;
  sc.id = "sphere_drop";
  sc.model.bodies.push_back(BodySpec::solid("ball", 1.0, Shape::sphere(0.1)));
  sc.model.planes.push_back(Plane{});
  BodyState s = at(Vec3(0.0, 0.0, 0.1));
  s.linear_velocity = Vec3(0.0, 0.0, -o.initial_speed.value_or(2.0));
  sc.initial.push_back(s);
  sc.duration = 0.5;
  return sc;
}

}  // namespace

ExternalInputs Scenario::inputs_at(double t) const {
  ExternalInputs in;
  in.wrenches.assign(model.num_bodies(), Vec6::Zero());
  for (const auto& e : schedule) {
    if (t < e.t0 || t >= e.t1) continue;
    const double s = e.t1 > e.t0 ? (t - e.t0) / (e.t1 - e.t0) : 0.0;
    in.wrenches.at(e.body) += e.w0 + s * (e.w1 - e.w0);
  }
  return in;
}

void Scenario::validate() const {
  model.validate();
  if (!(dt > 0.0)) throw Error("scenario: dt must be positive");
  if (!(duration >= dt)) throw Error("scenario: duration must be at least dt");
  if (static_cast<int>(initial.size()) != model.num_bodies()) {
    throw Error("scenario: initial state count does not match the bodies");
  }
  for (const auto& e : schedule) {
    if (e.body < 0 || e.body >= model.num_bodies()) throw Error("scenario: bad event body");
  }
}

std::vector<std::string> scenario_ids() {
  return {"box_on_plane", "boxes_fixed", "nunchaku", "fourbar_fixed", "fourbar_free",
          "sphere_drop"};
}

Scenario build_scenario(const std::string& id, const ScenarioOverrides& o) {
  Scenario sc;
  double drop = 0.0;
  if (id == "box_on_plane") {
    sc = box_on_plane();
    drop = 0.0;
  } else if (id == "boxes_fixed") {
    sc = boxes_fixed();
    drop = 0.5;
  } else if (id == "nunchaku") {
    sc = nunchaku();
    drop = 0.1;
  } else if (id == "fourbar_fixed" || id == "fourbar_free") {
    sc = fourbar(id == "fourbar_fixed");
    drop = 0.1;
  } else if (id == "sphere_drop") {
    sc = sphere_drop(o);
    drop = 0.05;
  } else {
    throw Error("unknown scenario '" + id + "'");
  }
  if (o.friction) sc.model.friction = *o.friction;
  if (o.restitution) sc.model.restitution = *o.restitution;
  if (o.dt) sc.dt = *o.dt;
  if (o.duration) sc.duration = *o.duration;
  if (o.margin) sc.collision.margin = *o.margin;
  if (o.masses) {
    if (o.masses->size() != sc.model.bodies.size()) {
      throw Error("override: mass count does not match the bodies");
    }
    for (size_t i = 0; i < o.masses->size(); ++i) {
      BodySpec& b = sc.model.bodies[i];
      b = BodySpec::solid(b.name, (*o.masses)[i], b.shape);
    }
  }
  set_drop_height(sc.model, &sc.initial, o.drop_height.value_or(drop));
  if (id == "fourbar_fixed") {
    // Weld the base to the world at its initial pose.
    sc.model.joints.push_back(joint_at("base_world", JointKind::kFixed, kWorld, 0, sc.initial,
                                       sc.initial[0].position, Mat3::Identity()));
  }
  if (!o.disable_schedule.value_or(false)) {
    if (id == "box_on_plane") box_on_plane_schedule(&sc);
    if (id == "boxes_fixed") boxes_fixed_schedule(&sc);
    if (id == "fourbar_fixed" || id == "fourbar_free") {
      fourbar_schedule(&sc, o.push_time.value_or(10.0), o.push_duration.value_or(0.1));
    }
  }
  if (o.no_ground.value_or(false)) sc.model.planes.clear();
  sc.validate();
  return sc;
}

namespace {

using nlohmann::json;

Vec3 vec3(const json& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }
json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Mat3 mat3(const json& j) {
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = j.at(3 * r + c).get<double>();
  }
  return m;
}
json to_json(const Mat3& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  }
  return a;
}

JointKind joint_kind(const std::string& s) {
  if (s == "fixed") return JointKind::kFixed;
  if (s == "revolute") return JointKind::kRevolute;
  if (s == "spherical") return JointKind::kSpherical;
  if (s == "prismatic") return JointKind::kPrismatic;
  throw Error("scene: unknown joint kind '" + s + "'");
}

const char* joint_kind_name(JointKind k) {
  switch (k) {
    case JointKind::kFixed: return "fixed";
    case JointKind::kRevolute: return "revolute";
    case JointKind::kSpherical: return "spherical";
    case JointKind::kPrismatic: return "prismatic";
  }
  return "fixed";
}

int body_ref(const json& j) {
  if (j.is_string() && j.get<std::string>() == "world") return kWorld;
  return j.get<int>();
}

}  // namespace

Scenario scenario_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("scene: parse error: ") + e.what());
  }
  try {
    Scenario sc;
    sc.id = doc.value("id", "scene");
    sc.dt = doc.value("dt", 1e-3);
    sc.duration = doc.value("duration", 1.0);
    if (doc.contains("gravity")) sc.model.gravity = vec3(doc["gravity"]);
    sc.model.friction = doc.value("friction", 0.7);
    sc.model.restitution = doc.value("restitution", 0.0);
    for (const auto& b : doc.at("bodies")) {
      const auto& shape = b.at("shape");
      Shape s;
      if (shape.contains("sphere")) {
        s = Shape::sphere(shape["sphere"].get<double>());
      } else if (shape.contains("box")) {
        s = Shape::box(vec3(shape["box"]));
      } else {
        throw Error("scene: body shape must be sphere or box");
      }
      BodySpec spec = BodySpec::solid(b.value("name", ""), b.at("mass").get<double>(), s);
      if (b.contains("inertia")) spec.local_inertia = mat3(b["inertia"]);
      sc.model.bodies.push_back(spec);
      BodyState st;
      if (b.contains("position")) st.position = vec3(b["position"]);
      if (b.contains("orientation")) {
        const auto& q = b["orientation"];
        st.orientation = Quat(q.at(3).get<double>(), q.at(0).get<double>(),
                              q.at(1).get<double>(), q.at(2).get<double>());
        st.orientation.normalize();
      }
      if (b.contains("linear_velocity")) st.linear_velocity = vec3(b["linear_velocity"]);
      if (b.contains("angular_velocity")) st.angular_velocity = vec3(b["angular_velocity"]);
      sc.initial.push_back(st);
    }
    if (doc.contains("joints")) {
      for (const auto& j : doc["joints"]) {
        JointSpec js;
        js.name = j.value("name", "");
        js.kind = joint_kind(j.at("kind").get<std::string>());
        js.base_body = body_ref(j.at("base"));
        js.follower_body = body_ref(j.at("follower"));
        if (j.contains("anchor_base")) js.anchor_base = vec3(j["anchor_base"]);
        if (j.contains("anchor_follower")) js.anchor_follower = vec3(j["anchor_follower"]);
        if (j.contains("axes")) js.axes = mat3(j["axes"]);
        if (j.contains("follower_axes")) js.follower_axes = mat3(j["follower_axes"]);
        if (j.contains("limits")) {
          for (const auto& l : j["limits"]) {
            js.limits.push_back(JointLimit{l.at("dof").get<int>(), l.at("min").get<double>(),
                                           l.at("max").get<double>()});
          }
        }
        sc.model.joints.push_back(js);
      }
    }
    if (doc.contains("planes")) {
      for (const auto& p : doc["planes"]) {
        sc.model.planes.push_back(Plane{vec3(p.at("normal")), p.value("offset", 0.0)});
      }
    }
    if (doc.contains("schedule")) {
      for (const auto& e : doc["schedule"]) {
        WrenchEvent ev;
        ev.body = e.at("body").get<int>();
        ev.t0 = e.at("t0").get<double>();
        ev.t1 = e.at("t1").get<double>();
        for (int i = 0; i < 6; ++i) {
          ev.w0[i] = e.at("w0").at(i).get<double>();
          ev.w1[i] = e.at("w1").at(i).get<double>();
        }
        sc.schedule.push_back(ev);
      }
    }
    if (doc.contains("collision")) {
      const auto& c = doc["collision"];
      sc.collision.margin = c.value("margin", sc.collision.margin);
      sc.collision.min_separation = c.value("min_separation", sc.collision.min_separation);
      if (c.contains("exclude")) {
        for (const auto& p : c["exclude"]) sc.collision.exclude(p.at(0).get<int>(), p.at(1).get<int>());
      }
    }
    sc.validate();
    return sc;
  } catch (const json::exception& e) {
    throw Error(std::string("scene: ") + e.what());
  }
}

std::string scenario_to_json(const Scenario& sc) {
  json doc;
  doc["id"] = sc.id;
  doc["dt"] = sc.dt;
  doc["duration"] = sc.duration;
  doc["gravity"] = to_json(sc.model.gravity);
  doc["friction"] = sc.model.friction;
  doc["restitution"] = sc.model.restitution;
  doc["bodies"] = json::array();
  for (int i = 0; i < sc.model.num_bodies(); ++i) {
    const auto& b = sc.model.bodies[i];
    const auto& s = sc.initial[i];
    json jb;
    jb["name"] = b.name;
    jb["mass"] = b.mass;
    jb["inertia"] = to_json(b.local_inertia);
    if (b.shape.kind == ShapeKind::kSphere) {
      jb["shape"] = {{"sphere", b.shape.radius}};
    } else {
      jb["shape"] = {{"box", to_json(b.shape.half_extents)}};
    }
    jb["position"] = to_json(s.position);
    jb["orientation"] = {s.orientation.x(), s.orientation.y(), s.orientation.z(), s.orientation.w()};
    jb["linear_velocity"] = to_json(s.linear_velocity);
    jb["angular_velocity"] = to_json(s.angular_velocity);
    doc["bodies"].push_back(jb);
  }
  doc["joints"] = json::array();
  for (const auto& j : sc.model.joints) {
    json jj;
    jj["name"] = j.name;
    jj["kind"] = joint_kind_name(j.kind);
    jj["base"] = j.base_body == kWorld ? json("world") : json(j.base_body);
    jj["follower"] = j.follower_body;
    jj["anchor_base"] = to_json(j.anchor_base);
    jj["anchor_follower"] = to_json(j.anchor_follower);
    jj["axes"] = to_json(j.axes);
    jj["follower_axes"] = to_json(j.follower_axes);
    jj["limits"] = json::array();
    for (const auto& l : j.limits) jj["limits"].push_back({{"dof", l.dof}, {"min", l.q_min}, {"max", l.q_max}});
    doc["joints"].push_back(jj);
  }
  doc["planes"] = json::array();
  for (const auto& p : sc.model.planes) {
    doc["planes"].push_back({{"normal", to_json(p.normal)}, {"offset", p.offset}});
  }
  doc["schedule"] = json::array();
  for (const auto& e : sc.schedule) {
    json w0 = json::array(), w1 = json::array();
    for (int i = 0; i < 6; ++i) {
      w0.push_back(e.w0[i]);
      w1.push_back(e.w1[i]);
    }
    doc["schedule"].push_back({{"body", e.body}, {"t0", e.t0}, {"t1", e.t1}, {"w0", w0}, {"w1", w1}});
  }
  json ex = json::array();
  for (const auto& p : sc.collision.pair_filter) ex.push_back({p.first, p.second});
  doc["collision"] = {{"margin", sc.collision.margin},
                      {"min_separation", sc.collision.min_separation},
                      {"exclude", ex}};
  return doc.dump(2);
}

Scenario load_scene_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open scene file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return scenario_from_json(ss.str());
}

}  // namespace dualsim
