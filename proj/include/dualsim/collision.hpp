#pragma once

#include "dualsim/model.hpp"

#include <set>
#include <utility>
#include <vector>

namespace dualsim {

struct CollisionConfig {
  double margin = 1e-5;          // activation threshold on the gap (m)
  double min_separation = 1e-4;  // culling radius (m)
  std::set<std::pair<int, int>> pair_filter;  // unordered body pairs, stored (min, max)

  void exclude(int a, int b);
  bool excluded(int a, int b) const;
};

enum class GeometryKind { kSphere, kBox, kPlane };

// A posed primitive. Planes are world geometry.
struct Collider {
  int body = kWorld;
  GeometryKind kind = GeometryKind::kSphere;
  double radius = 0.0;
  Vec3 half_extents = Vec3::Zero();
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  Vec3 plane_normal = Vec3::UnitZ();
  double plane_offset = 0.0;

  static Collider from_body(int index, const BodySpec& spec, const BodyState& state);
  static Collider from_plane(const Plane& plane);
};

// Contacts between a and b with normals pointing from a to b, positions on the
// surface of a, negative gaps for penetration. Points with gap > margin are dropped.
std::vector<ContactPoint> collide_pair(const Collider& a, const Collider& b,
                                       const CollisionConfig& config);

// Greedy, order-preserving removal of points closer than min_separation to a
// kept point of the same body pair.
std::vector<ContactPoint> cull_contacts(const std::vector<ContactPoint>& points,
                                        const CollisionConfig& config);

// All plane-body pairs, then body pairs (i < j) not filtered, then culling.
// Friction and restitution come from the model defaults.
std::vector<ContactPoint> collide_scene(const SystemModel& model,
                                        const std::vector<BodyState>& states,
                                        const CollisionConfig& config);

}  // namespace dualsim
