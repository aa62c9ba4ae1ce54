#include "dualsim/collision.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace dualsim {

void CollisionConfig::exclude(int a, int b) {
  pair_filter.insert({std::min(a, b), std::max(a, b)});
}

bool CollisionConfig::excluded(int a, int b) const {
  return pair_filter.count({std::min(a, b), std::max(a, b)}) > 0;
}

Collider Collider::from_body(int index, const BodySpec& spec, const BodyState& state) {
  Collider c;
  c.body = index;
  c.kind = spec.shape.kind == ShapeKind::kSphere ? GeometryKind::kSphere : GeometryKind::kBox;
  c.radius = spec.shape.radius;
  c.half_extents = spec.shape.half_extents;
  c.position = state.position;
  c.rotation = state.orientation.toRotationMatrix();
  return c;
}

Collider Collider::from_plane(const Plane& plane) {
  Collider c;
  c.body = kWorld;
  c.kind = GeometryKind::kPlane;
  c.plane_normal = plane.normal.normalized();
  c.plane_offset = plane.offset;
  return c;
}

namespace {

ContactPoint make_contact(int a, int b, const Vec3& p, const Vec3& n, double gap) {
  ContactPoint c;
  c.body_a = a;
  c.body_b = b;
  c.position = p;
  c.normal = n;
  c.gap = gap;
  return c;
}

// Re-expresses contacts computed for (b, a) as contacts for (a, b).
std::vector<ContactPoint> swapped(std::vector<ContactPoint> pts) {
  for (auto& c : pts) {
    std::swap(c.body_a, c.body_b);
    c.position = c.position + c.gap * c.normal;
    c.normal = -c.normal;
  }
  return pts;
}

std::array<Vec3, 8> box_corners(const Collider& box) {
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    out[i] = box.position + box.rotation * s.cwiseProduct(box.half_extents);
  }
  return out;
}

double box_support(const Collider& box, const Vec3& dir) {
  const Vec3 local = box.rotation.transpose() * dir;
  return box.half_extents.dot(local.cwiseAbs());
}

// Keeps the `count` deepest entries, then restores candidate order.
std::vector<ContactPoint> deepest(std::vector<std::pair<int, ContactPoint>> cand,
                                  size_t count) {
  if (cand.size() > count) {
    std::stable_sort(cand.begin(), cand.end(), [](const auto& x, const auto& y) {
      return x.second.gap < y.second.gap;
    });
    cand.resize(count);
    std::sort(cand.begin(), cand.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
  }
  std::vector<ContactPoint> out;
  for (auto& c : cand) out.push_back(c.second);
  return out;
}

std::vector<ContactPoint> plane_sphere(const Collider& pl, const Collider& s,
                                       const CollisionConfig& cfg) {
  const Vec3& n = pl.plane_normal;
  const double dist = n.dot(s.position) - pl.plane_offset;
  const double gap = dist - s.radius;
  if (gap > cfg.margin) return {};
  return {make_contact(pl.body, s.body, s.position - dist * n, n, gap)};
}

std::vector<ContactPoint> plane_box(const Collider& pl, const Collider& box,
                                    const CollisionConfig& cfg) {
  const Vec3& n = pl.plane_normal;
  const auto corners = box_corners(box);
  std::vector<std::pair<int, ContactPoint>> cand;
  for (int i = 0; i < 8; ++i) {
    const double gap = n.dot(corners[i]) - pl.plane_offset;
    if (gap <= cfg.margin) {
      cand.push_back({i, make_contact(pl.body, box.body, corners[i] - gap * n, n, gap)});
    }
  }
  return deepest(std::move(cand), 4);
}

std::vector<ContactPoint> sphere_sphere(const Collider& a, const Collider& b,
                                        const CollisionConfig& cfg) {
  const Vec3 delta = b.position - a.position;
  const double dist = delta.norm();
  const Vec3 n = dist > 1e-12 ? Vec3(delta / dist) : Vec3(Vec3::UnitZ());
  const double gap = dist - a.radius - b.radius;
  if (gap > cfg.margin) return {};
  return {make_contact(a.body, b.body, a.position + a.radius * n, n, gap)};
}

std::vector<ContactPoint> box_sphere(const Collider& box, const Collider& s,
                                     const CollisionConfig& cfg) {
  const Vec3 c = box.rotation.transpose() * (s.position - box.position);
  const Vec3& h = box.half_extents;
  const Vec3 q = c.cwiseMax(-h).cwiseMin(h);
  Vec3 n;
  Vec3 p_local;
  double gap;
  const double out_dist = (c - q).norm();
  if (out_dist > 1e-12) {
    n = box.rotation * ((c - q) / out_dist);
    p_local = q;
    gap = out_dist - s.radius;
  } else {
    int axis = 0;
    double depth = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
      const double d = h[i] - std::abs(c[i]);
      if (d < depth) {
        depth = d;
        axis = i;
      }
    }
    const double sign = c[axis] >= 0.0 ? 1.0 : -1.0;
    Vec3 nl = Vec3::Zero();
    nl[axis] = sign;
    n = box.rotation * nl;
    p_local = c;
    p_local[axis] = sign * h[axis];
    gap = -depth - s.radius;
  }
  if (gap > cfg.margin) return {};
  return {make_contact(box.body, s.body, box.position + box.rotation * p_local, n, gap)};
}

std::vector<ContactPoint> box_box(const Collider& a, const Collider& b,
                                  const CollisionConfig& cfg) {
  const Vec3 d = b.position - a.position;
  std::vector<Vec3> axes;
  for (int i = 0; i < 3; ++i) axes.push_back(a.rotation.col(i));
  for (int i = 0; i < 3; ++i) axes.push_back(b.rotation.col(i));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const Vec3 c = a.rotation.col(i).cross(b.rotation.col(j));
      if (c.norm() > 1e-9) axes.push_back(c.normalized());
    }
  }
  double best_overlap = std::numeric_limits<double>::infinity();
  Vec3 n = Vec3::UnitZ();
  for (const Vec3& L : axes) {
    const double overlap = box_support(a, L) + box_support(b, L) - std::abs(L.dot(d));
    if (-overlap > cfg.margin) return {};
    // Face axes come first, so near-ties prefer faces over edge directions.
    if (overlap < best_overlap - 1e-12) {
      best_overlap = overlap;
      n = L.dot(d) >= 0.0 ? L : Vec3(-L);
    }
  }
  const double top_a = n.dot(a.position) + box_support(a, n);
  const double bottom_b = n.dot(b.position) - box_support(b, n);
  const double tol = std::max(cfg.margin, 0.0) + 1e-9;
  auto inside = [tol](const Collider& box, const Vec3& v) {
    const Vec3 l = box.rotation.transpose() * (v - box.position);
    return (l.cwiseAbs() - box.half_extents).maxCoeff() <= tol;
  };
  std::vector<std::pair<int, ContactPoint>> cand;
  const auto cb = box_corners(b);
  for (int i = 0; i < 8; ++i) {
    const double gap = n.dot(cb[i]) - top_a;
    if (gap <= cfg.margin && inside(a, cb[i])) {
      cand.push_back({i, make_contact(a.body, b.body, cb[i] - gap * n, n, gap)});
    }
  }
  const auto ca = box_corners(a);
  for (int i = 0; i < 8; ++i) {
    const double gap = bottom_b - n.dot(ca[i]);
    if (gap <= cfg.margin && inside(b, ca[i])) {
      cand.push_back({8 + i, make_contact(a.body, b.body, ca[i], n, gap)});
    }
  }
  if (cand.empty()) {
    // Edge-edge configurations: one point at the deepest vertex of b along -n.
    int k = 0;
    for (int i = 1; i < 8; ++i) {
      if (n.dot(cb[i]) < n.dot(cb[k])) k = i;
    }
    const double gap = -best_overlap;
    cand.push_back({k, make_contact(a.body, b.body, cb[k] - gap * n, n, gap)});
  }
  return deepest(std::move(cand), 4);
}

}  // namespace

std::vector<ContactPoint> collide_pair(const Collider& a, const Collider& b,
                                       const CollisionConfig& config) {
  using K = GeometryKind;
  if (a.kind == K::kPlane && b.kind == K::kSphere) return plane_sphere(a, b, config);
  if (a.kind == K::kPlane && b.kind == K::kBox) return plane_box(a, b, config);
  if (a.kind == K::kSphere && b.kind == K::kPlane) return swapped(plane_sphere(b, a, config));
  if (a.kind == K::kBox && b.kind == K::kPlane) return swapped(plane_box(b, a, config));
  if (a.kind == K::kSphere && b.kind == K::kSphere) return sphere_sphere(a, b, config);
  if (a.kind == K::kBox && b.kind == K::kSphere) return box_sphere(a, b, config);
  if (a.kind == K::kSphere && b.kind == K::kBox) return swapped(box_sphere(b, a, config));
  if (a.kind == K::kBox && b.kind == K::kBox) return box_box(a, b, config);
  throw Error("collide_pair: unsupported pair");
}

std::vector<ContactPoint> cull_contacts(const std::vector<ContactPoint>& points,
                                        const CollisionConfig& config) {
  if (config.min_separation < 0.0) throw Error("cull_contacts: negative min_separation");
  std::vector<ContactPoint> kept;
  for (const auto& p : points) {
    bool redundant = false;
    for (const auto& k : kept) {
      if (k.body_a == p.body_a && k.body_b == p.body_b &&
          (k.position - p.position).norm() < config.min_separation) {
        redundant = true;
        break;
      }
    }
    if (!redundant) kept.push_back(p);
  }
  return kept;
}

std::vector<ContactPoint> collide_scene(const SystemModel& model,
                                        const std::vector<BodyState>& states,
                                        const CollisionConfig& config) {
  std::vector<Collider> bodies;
  for (int i = 0; i < model.num_bodies(); ++i) {
    bodies.push_back(Collider::from_body(i, model.bodies[i], states[i]));
  }
  std::vector<ContactPoint> all;
  auto append = [&all, &model](std::vector<ContactPoint> pts) {
    for (auto& c : pts) {
      c.friction = model.friction;
      c.restitution = model.restitution;
      all.push_back(c);
    }
  };
  for (const Plane& pl : model.planes) {
    const Collider pc = Collider::from_plane(pl);
    for (const Collider& b : bodies) append(collide_pair(pc, b, config));
  }
  for (size_t i = 0; i < bodies.size(); ++i) {
    for (size_t j = i + 1; j < bodies.size(); ++j) {
      if (config.excluded(static_cast<int>(i), static_cast<int>(j))) continue;
      append(collide_pair(bodies[i], bodies[j], config));
    }
  }
  return cull_contacts(all, config);
}

}  // namespace dualsim
