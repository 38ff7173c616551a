#pragma once

// Geometric primitives for specular LiDAR paths: rays, planar mirror panels,
// diffuse solids, a flat ground plane, nearest-hit queries and the folded
// two-hop range that produces virtual points.
//
// World frame is right-handed and z-up with the ground at z = 0.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mirrorspoof/errors.hpp"

namespace mirrorspoof {

using Vec3 = Eigen::Vector3d;

inline constexpr double kUnitTolerance = 1e-9;
inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

inline bool is_unit(const Vec3& v, double tol = kUnitTolerance) {
  return std::abs(v.norm() - 1.0) <= tol;
}

// Rotation about +z (counter-clockwise seen from above).
inline Vec3 rotate_z(const Vec3& v, double yaw_rad) {
  const double c = std::cos(yaw_rad), s = std::sin(yaw_rad);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z()};
}

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitY();

  Vec3 at(double t) const { return origin + t * direction; }
};

// Zero-thickness, one-sided rectangular mirror. Only rays arriving against
// the front normal interact; back-face rays pass through.
struct MirrorPanel {
  Vec3 center = Vec3::Zero();
  Vec3 normal = -Vec3::UnitY();
  Vec3 up = Vec3::UnitZ();
  double width = 0.6;
  double height = 0.4;
  double reflectivity = 0.95;

  double area() const { return width * height; }
  Vec3 right() const { return up.cross(normal); }

  void validate() const {
    detail::require(is_unit(normal), "mirror normal must be unit length");
    detail::require(is_unit(up), "mirror up vector must be unit length");
    detail::require(std::abs(normal.dot(up)) <= kUnitTolerance,
                    "mirror up vector must be perpendicular to its normal");
    detail::require(width > 0.0 && height > 0.0, "mirror dimensions must be positive");
    detail::require(reflectivity > 0.0 && reflectivity <= 1.0,
                    "mirror reflectivity must lie in (0, 1]");
  }

  // Panel whose normal is `normal` and whose up vector is world z projected
  // onto the panel plane (world y if the panel lies flat).
  static MirrorPanel oriented(const Vec3& center, const Vec3& normal, double width,
                              double height, double reflectivity = 0.95) {
    MirrorPanel p;
    p.center = center;
    p.normal = normal.normalized();
    Vec3 ref = std::abs(p.normal.z()) > 0.999 ? Vec3::UnitY() : Vec3::UnitZ();
    p.up = (ref - ref.dot(p.normal) * p.normal).normalized();
    p.width = width;
    p.height = height;
    p.reflectivity = reflectivity;
    p.validate();
    return p;
  }
};

enum class SolidShape { kBox, kFrustum };

// Diffuse obstacle standing on `base` (bottom-center). A box spans
// size_x * size_y * height around the base in its yawed frame; a frustum has
// radius `base_radius` at the bottom and `top_radius` at the top (0 for a
// cone, equal radii for a cylinder).
struct SolidObstacle {
  SolidShape shape = SolidShape::kFrustum;
  Vec3 base = Vec3::Zero();
  double yaw = 0.0;  // rad
  double size_x = 1.0;
  double size_y = 1.0;
  double height = 1.0;
  double base_radius = 0.5;
  double top_radius = 0.0;
  double albedo = 0.5;

  void validate() const {
    detail::require(height > 0.0, "obstacle height must be positive");
    if (shape == SolidShape::kBox) {
      detail::require(size_x > 0.0 && size_y > 0.0, "box dimensions must be positive");
    } else {
      detail::require(base_radius > 0.0 && top_radius >= 0.0,
                      "frustum radii must be positive (top may be 0)");
    }
    detail::require(albedo > 0.0 && albedo <= 1.0, "albedo must lie in (0, 1]");
  }

  static SolidObstacle box(const Vec3& base, double size_x, double size_y, double height,
                           double yaw = 0.0, double albedo = 0.4) {
    SolidObstacle s;
    s.shape = SolidShape::kBox;
    s.base = base;
    s.size_x = size_x;
    s.size_y = size_y;
    s.height = height;
    s.yaw = yaw;
    s.albedo = albedo;
    s.validate();
    return s;
  }

  static SolidObstacle cone(const Vec3& base, double base_radius, double height,
                            double albedo = 0.5) {
    SolidObstacle s;
    s.shape = SolidShape::kFrustum;
    s.base = base;
    s.base_radius = base_radius;
    s.top_radius = 0.0;
    s.height = height;
    s.albedo = albedo;
    s.validate();
    return s;
  }

  static SolidObstacle cylinder(const Vec3& base, double radius, double height,
                                double albedo = 0.4) {
    SolidObstacle s = cone(base, radius, height, albedo);
    s.top_radius = radius;
    return s;
  }
};

struct Scene {
  bool has_ground = true;
  double ground_albedo = 0.2;
  std::vector<MirrorPanel> mirrors;
  std::vector<SolidObstacle> solids;

  void validate() const {
    detail::require(!has_ground || (ground_albedo > 0.0 && ground_albedo <= 1.0),
                    "ground albedo must lie in (0, 1]");
    for (const auto& m : mirrors) m.validate();
    for (const auto& s : solids) s.validate();
  }
};

enum class SurfaceKind { kMirror, kDiffuse, kGround };

struct SurfaceRef {
  SurfaceKind kind = SurfaceKind::kGround;
  int index = -1;  // into Scene::mirrors or Scene::solids; -1 for ground

  friend bool operator==(const SurfaceRef&, const SurfaceRef&) = default;
};

struct Hit {
  Vec3 point = Vec3::Zero();
  double distance = 0.0;
  Vec3 normal = Vec3::UnitZ();  // outward surface normal at the hit
  SurfaceRef surface;
};

namespace detail {

inline constexpr double kRayEpsilon = 1e-9;

inline std::optional<Hit> intersect_ground(const Ray& ray) {
  if (ray.direction.z() >= 0.0 || ray.origin.z() <= 0.0) return std::nullopt;
  const double t = -ray.origin.z() / ray.direction.z();
  if (t <= kRayEpsilon) return std::nullopt;
  Hit h;
  h.point = ray.at(t);
  h.point.z() = 0.0;
  h.distance = t;
  h.normal = Vec3::UnitZ();
  h.surface = {SurfaceKind::kGround, -1};
  return h;
}

inline std::optional<Hit> intersect_mirror(const Ray& ray, const MirrorPanel& panel) {
  const double denom = ray.direction.dot(panel.normal);
  if (denom >= 0.0) return std::nullopt;  // parallel or back face
  const double t = (panel.center - ray.origin).dot(panel.normal) / denom;
  if (t <= kRayEpsilon) return std::nullopt;
  const Vec3 p = ray.at(t);
  const Vec3 rel = p - panel.center;
  if (std::abs(rel.dot(panel.right())) > 0.5 * panel.width ||
      std::abs(rel.dot(panel.up)) > 0.5 * panel.height) {
    return std::nullopt;
  }
  Hit h;
  h.point = p;
  h.distance = t;
  h.normal = panel.normal;
  return h;
}

inline std::optional<Hit> intersect_box(const Ray& ray, const SolidObstacle& box) {
  const Vec3 o = rotate_z(ray.origin - box.base, -box.yaw);
  const Vec3 d = rotate_z(ray.direction, -box.yaw);
  const Vec3 lo(-0.5 * box.size_x, -0.5 * box.size_y, 0.0);
  const Vec3 hi(0.5 * box.size_x, 0.5 * box.size_y, box.height);

  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = -1;
  double near_sign = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(d[axis]) < 1e-15) {
      if (o[axis] < lo[axis] || o[axis] > hi[axis]) return std::nullopt;
      continue;
    }
    double t0 = (lo[axis] - o[axis]) / d[axis];
    double t1 = (hi[axis] - o[axis]) / d[axis];
    double sign = -1.0;
    if (t0 > t1) {
      std::swap(t0, t1);
      sign = 1.0;
    }
    if (t0 > t_near) {
      t_near = t0;
      near_axis = axis;
      near_sign = sign;
    }
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  if (near_axis < 0 || t_near <= kRayEpsilon) return std::nullopt;  // origin inside or behind
  Vec3 local_normal = Vec3::Zero();
  local_normal[near_axis] = near_sign;
  Hit h;
  h.point = ray.at(t_near);
  h.distance = t_near;
  h.normal = rotate_z(local_normal, box.yaw);
  return h;
}

inline std::optional<Hit> intersect_frustum(const Ray& ray, const SolidObstacle& f) {
  const Vec3 q = ray.origin - f.base;
  const Vec3& d = ray.direction;
  const double slope = (f.top_radius - f.base_radius) / f.height;  // dr/dz
  const double r_at_origin = f.base_radius + slope * q.z();

  double best = std::numeric_limits<double>::infinity();
  Vec3 best_normal = Vec3::Zero();

  auto accept_lateral = [&](double t) {
    if (t <= kRayEpsilon || t >= best) return;
    const Vec3 p = q + t * d;
    if (p.z() < 0.0 || p.z() > f.height) return;
    if (f.base_radius + slope * p.z() < 0.0) return;
    best = t;
    best_normal = Vec3(p.x(), p.y(), -(f.base_radius + slope * p.z()) * slope).normalized();
  };

  const double a = d.x() * d.x() + d.y() * d.y() - slope * slope * d.z() * d.z();
  const double b = 2.0 * (q.x() * d.x() + q.y() * d.y() - slope * r_at_origin * d.z());
  const double c = q.x() * q.x() + q.y() * q.y() - r_at_origin * r_at_origin;
  if (std::abs(a) > 1e-14) {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      // Numerically stable pair of roots.
      const double k = -0.5 * (b + std::copysign(sq, b));
      if (k != 0.0) {
        accept_lateral(k / a);
        accept_lateral(c / k);
      } else {
        accept_lateral(0.0);
      }
    }
  } else if (std::abs(b) > 1e-14) {
    accept_lateral(-c / b);
  }

  auto accept_cap = [&](double z_cap, double radius, double normal_z) {
    if (radius <= 0.0 || std::abs(d.z()) < 1e-15) return;
    const double t = (z_cap - q.z()) / d.z();
    if (t <= kRayEpsilon || t >= best) return;
    const Vec3 p = q + t * d;
    if (p.x() * p.x() + p.y() * p.y() > radius * radius) return;
    best = t;
    best_normal = Vec3(0.0, 0.0, normal_z);
  };
  accept_cap(f.height, f.top_radius, 1.0);
  accept_cap(0.0, f.base_radius, -1.0);

  if (!std::isfinite(best)) return std::nullopt;
  Hit h;
  h.point = ray.at(best);
  h.distance = best;
  h.normal = best_normal;
  return h;
}

}  // namespace detail

// Law of reflection for unit vectors.
inline Vec3 reflect(const Vec3& v_in, const Vec3& n) {
  detail::require(is_unit(v_in), "reflect: incoming direction must be unit length");
  detail::require(is_unit(n), "reflect: surface normal must be unit length");
  return v_in - 2.0 * v_in.dot(n) * n;
}

// Nearest hit along the positive ray parameter, or nullopt.
inline std::optional<Hit> intersect(const Ray& ray, const Scene& scene) {
  detail::require(is_unit(ray.direction), "intersect: ray direction must be unit length");
  std::optional<Hit> best;
  auto consider = [&](std::optional<Hit> h, SurfaceRef ref) {
    if (h && (!best || h->distance < best->distance)) {
      h->surface = ref;
      best = h;
    }
  };
  if (scene.has_ground) consider(detail::intersect_ground(ray), {SurfaceKind::kGround, -1});
  for (std::size_t i = 0; i < scene.mirrors.size(); ++i) {
    consider(detail::intersect_mirror(ray, scene.mirrors[i]),
             {SurfaceKind::kMirror, static_cast<int>(i)});
  }
  for (std::size_t i = 0; i < scene.solids.size(); ++i) {
    const auto& s = scene.solids[i];
    consider(s.shape == SolidShape::kBox ? detail::intersect_box(ray, s)
                                         : detail::intersect_frustum(ray, s),
             {SurfaceKind::kDiffuse, static_cast<int>(i)});
  }
  return best;
}

struct VirtualPoint {
  Vec3 position = Vec3::Zero();
  double range = 0.0;          // d_LM + d_MS
  double mirror_range = 0.0;   // d_LM
};

// Where a time-of-flight sensor places a two-hop return: along the original
// emission direction at the total folded range.
inline VirtualPoint fold_path(const Vec3& sensor, const Hit& mirror_hit, const Hit& secondary_hit) {
  detail::require(mirror_hit.surface.kind == SurfaceKind::kMirror,
                  "fold_path: first hit must be a mirror");
  const Vec3 to_secondary = secondary_hit.point - mirror_hit.point;
  detail::require(to_secondary.dot(mirror_hit.normal) >= -1e-9,
                  "fold_path: secondary hit lies behind the mirror plane");
  const Vec3 emission = mirror_hit.point - sensor;
  const double d_lm = emission.norm();
  detail::require(d_lm > 0.0, "fold_path: sensor coincides with the mirror hit");
  VirtualPoint vp;
  vp.mirror_range = d_lm;
  vp.range = d_lm + to_secondary.norm();
  vp.position = sensor + (vp.range / d_lm) * emission;
  return vp;
}

}  // namespace mirrorspoof
