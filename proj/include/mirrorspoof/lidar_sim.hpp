#pragma once

// Ray-cast LiDAR scans of a Scene with first-return semantics. A beam that
// strikes a mirror is followed for one specular bounce: if the reflected ray
// leaves the scene the return is lost (data omission); if it reaches a
// diffuse surface or the ground the sensor reports a virtual point at the
// folded range (data fabrication).

#include <algorithm>
#include <cmath>
#include <vector>

#include "mirrorspoof/errors.hpp"
#include "mirrorspoof/optics.hpp"
#include "mirrorspoof/point_cloud.hpp"

namespace mirrorspoof {

struct LidarConfig {
  int channels = 128;
  double fov_min_deg = -22.5;
  double fov_max_deg = 22.5;
  double azimuth_step_deg = 360.0 / 1024.0;
  double max_range = 120.0;
  double scan_rate_hz = 10.0;
  double mount_height = 2.2;
  double detection_threshold = 2e-4;  // normalized received power

  int columns() const { return static_cast<int>(std::lround(360.0 / azimuth_step_deg)); }

  void validate() const {
    detail::require(channels >= 1, "lidar: channels must be >= 1");
    detail::require(fov_min_deg < fov_max_deg || channels == 1,
                    "lidar: vertical FOV min must be below max");
    detail::require(azimuth_step_deg > 0.0, "lidar: azimuth step must be positive");
    const double cols = 360.0 / azimuth_step_deg;
    detail::require(std::abs(cols - std::round(cols)) <= 1e-6,
                    "lidar: azimuth step must divide 360 degrees");
    detail::require(max_range > 0.0, "lidar: max range must be positive");
    detail::require(scan_rate_hz > 0.0, "lidar: scan rate must be positive");
    detail::require(detection_threshold > 0.0 && detection_threshold < 1.0,
                    "lidar: detection threshold must lie in (0, 1)");
  }

  double elevation_deg(int channel) const {
    if (channels == 1) return 0.5 * (fov_min_deg + fov_max_deg);
    return fov_min_deg + (fov_max_deg - fov_min_deg) * channel / (channels - 1);
  }
};

// Sensor placement in the world. Yaw 0 looks along world +y; the sensor
// frame has x to the right, y forward and z up.
struct SensorPose {
  Vec3 position = Vec3(0.0, 0.0, 2.2);
  double yaw = 0.0;  // rad, counter-clockwise

  static SensorPose at(double x, double y, double yaw, const LidarConfig& cfg) {
    return {Vec3(x, y, cfg.mount_height), yaw};
  }

  Vec3 to_world(const Vec3& p_sensor) const { return position + rotate_z(p_sensor, yaw); }
  Vec3 to_sensor(const Vec3& p_world) const { return rotate_z(p_world - position, -yaw); }
  Vec3 direction_to_world(const Vec3& d_sensor) const { return rotate_z(d_sensor, yaw); }
};

// Calibration so that a 1 m^2, albedo-1 target at 10 m returns exactly 1.
inline constexpr double kPowerCalibration = 1.0e4;

// Normalized received power of the 1/R^4 range equation, clamped to [0, 1].
inline double received_power(double path_length, double effective_cross_section, double albedo) {
  detail::require(path_length > 0.0, "received_power: path length must be positive");
  const double r2 = path_length * path_length;
  const double p = kPowerCalibration * albedo * effective_cross_section / (r2 * r2);
  return std::clamp(p, 0.0, 1.0);
}

namespace detail {

inline double surface_albedo(const Scene& scene, const SurfaceRef& ref) {
  return ref.kind == SurfaceKind::kGround ? scene.ground_albedo : scene.solids[ref.index].albedo;
}

// Each ideal ray samples a 1 m^2 reference patch foreshortened by the
// incidence angle. Non-physical stand-in for per-beam intensity scaling.
inline double beam_cross_section(const Vec3& direction, const Hit& hit) {
  return std::abs(direction.dot(hit.normal));
}

}  // namespace detail

// Trace one beam (world-frame ray) and produce at most one return, expressed
// in world coordinates. Returns false when the beam yields nothing.
inline bool trace_beam(const Scene& scene, const Ray& ray, const LidarConfig& config,
                       LidarPoint& out_world) {
  const auto first = intersect(ray, scene);
  if (!first || first->distance > config.max_range) return false;

  if (first->surface.kind != SurfaceKind::kMirror) {
    const double power = received_power(first->distance, detail::beam_cross_section(ray.direction, *first),
                                        detail::surface_albedo(scene, first->surface));
    if (power < config.detection_threshold) return false;
    out_world.position = first->point;
    out_world.intensity = power;
    out_world.tag = first->surface.kind == SurfaceKind::kGround ? PointTag::kGround : PointTag::kDirect;
    out_world.source = first->surface;
    return true;
  }

  const MirrorPanel& panel = scene.mirrors[first->surface.index];
  const Ray bounced{first->point, reflect(ray.direction, first->normal).normalized()};
  const auto second = intersect(bounced, scene);
  // Only one specular bounce is modelled; a second mirror loses the beam.
  if (!second || second->surface.kind == SurfaceKind::kMirror) return false;
  const VirtualPoint vp = fold_path(ray.origin, *first, *second);
  if (vp.range > config.max_range) return false;
  const double power =
      panel.reflectivity * panel.reflectivity *
      received_power(vp.range, detail::beam_cross_section(bounced.direction, *second),
                     detail::surface_albedo(scene, second->surface));
  if (power < config.detection_threshold) return false;
  out_world.position = vp.position;
  out_world.intensity = power;
  out_world.tag = PointTag::kVirtual;
  out_world.source = second->surface;
  return true;
}

// Full scan in canonical order (channel-major, then azimuth). Point
// positions are in the sensor frame.
inline PointCloud scan(const Scene& scene, const SensorPose& pose, const LidarConfig& config,
                       int frame = 0, double timestamp = 0.0) {
  config.validate();
  PointCloud cloud;
  cloud.frame = frame;
  cloud.timestamp = timestamp;
  const int cols = config.columns();
  for (int ch = 0; ch < config.channels; ++ch) {
    const double el = deg_to_rad(config.elevation_deg(ch));
    const double ce = std::cos(el), se = std::sin(el);
    for (int col = 0; col < cols; ++col) {
      // Azimuth measured from forward (+y) towards the right (+x).
      const double az = deg_to_rad(col * config.azimuth_step_deg);
      const Vec3 dir_sensor(std::sin(az) * ce, std::cos(az) * ce, se);
      const Ray ray{pose.position, pose.direction_to_world(dir_sensor).normalized()};
      LidarPoint p;
      if (trace_beam(scene, ray, config, p)) {
        p.position = pose.to_sensor(p.position);
        cloud.points.push_back(p);
      }
    }
  }
  return cloud;
}

inline std::size_t count_from_surface(const PointCloud& cloud, PointTag tag, const SurfaceRef& ref) {
  std::size_t n = 0;
  for (const auto& p : cloud.points) n += (p.tag == tag && p.source == ref) ? 1 : 0;
  return n;
}

}  // namespace mirrorspoof
