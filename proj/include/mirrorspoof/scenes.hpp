#pragma once

// Reference scenes for the two mirror attacks.
//
// Object removal (ORA): a traffic cone (0.5 m tall, 0.29 m base diameter)
// stands in front of the vehicle and a vertical 60 x 40 cm panel between the
// sensor and the cone hides it. Object addition (OAA): a mirror array ahead
// of the vehicle reflects beams onto a roadside wall so the wall reappears
// as a phantom surface behind the array.

#include <cmath>
#include <span>
#include <vector>

#include "mirrorspoof/lidar_sim.hpp"
#include "mirrorspoof/optics.hpp"

namespace mirrorspoof {

inline constexpr double kConeHeight = 0.50;
inline constexpr double kConeBaseRadius = 0.145;

// Sensor sits at the world origin (x, y) looking along +y.
struct OraSetup {
  double cone_distance = 4.0;   // from the vehicle front to the cone axis
  double sensor_setback = 1.5;  // sensor to vehicle front, horizontal
  double panel_width = 0.60;
  double panel_height = 0.40;
  double panel_distance = 3.0;  // sensor to panel centre, horizontal
  double cone_albedo = 0.5;

  double cone_range() const { return cone_distance + sensor_setback; }
};

inline SolidObstacle ora_cone(const OraSetup& s) {
  return SolidObstacle::cone(Vec3(0.0, s.cone_range(), 0.0), kConeBaseRadius, kConeHeight,
                             s.cone_albedo);
}

inline Scene ora_baseline_scene(const OraSetup& s = {}) {
  Scene scene;
  scene.solids.push_back(ora_cone(s));
  return scene;
}

// Vertical panel centred on the sightline to the cone's mid-height and
// yawed by `tilt_deg` about its vertical axis (0 deg faces the sensor).
inline MirrorPanel ora_panel(const OraSetup& s, double tilt_deg, double mount_height) {
  const double mid = 0.5 * kConeHeight;
  const double frac = s.panel_distance / s.cone_range();
  const Vec3 center(0.0, s.panel_distance, mount_height + (mid - mount_height) * frac);
  const Vec3 normal = rotate_z(-Vec3::UnitY(), deg_to_rad(tilt_deg));
  return MirrorPanel::oriented(center, normal, s.panel_width, s.panel_height);
}

inline Scene ora_scene(const OraSetup& s, double tilt_deg, double mount_height = 2.2) {
  Scene scene = ora_baseline_scene(s);
  scene.mirrors.push_back(ora_panel(s, tilt_deg, mount_height));
  return scene;
}

// Direct returns from the cone for each panel tilt.
inline std::vector<std::size_t> ora_sweep(std::span<const double> tilts_deg, const OraSetup& setup = {},
                                          const LidarConfig& config = {}) {
  const SensorPose pose = SensorPose::at(0.0, 0.0, 0.0, config);
  const SurfaceRef cone_ref{SurfaceKind::kDiffuse, 0};
  std::vector<std::size_t> counts;
  counts.reserve(tilts_deg.size());
  for (double tilt : tilts_deg) {
    const PointCloud pc = scan(ora_scene(setup, tilt, config.mount_height), pose, config);
    counts.push_back(count_from_surface(pc, PointTag::kDirect, cone_ref));
  }
  return counts;
}

// Mirror array straight ahead of the sensor, yawed by `tilt_deg` so the
// central beam is deflected by twice the tilt onto a wall standing
// `wall_standoff` metres from the array along the deflected direction.
struct OaaSetup {
  double mirror_distance = 3.0;  // sensor to array centre, horizontal
  double tilt_deg = 30.0;
  double width = 1.0;
  double height = 0.6;
  double center_height = 1.2;
  double wall_standoff = 2.1;  // keeps the wall's image off grid-cell boundaries
  double wall_length = 10.0;
  double wall_height = 3.0;
  double wall_albedo = 0.4;

  // Fixed 0.6 m height; the width carries the area so the array's footprint
  // in the ground plane grows with it.
  static OaaSetup with_area(double area) {
    detail::require(area > 0.0, "mirror area must be positive");
    OaaSetup s;
    s.height = 0.6;
    s.width = area / s.height;
    return s;
  }
};

inline MirrorPanel oaa_panel(const OaaSetup& s) {
  const Vec3 center(0.0, s.mirror_distance, s.center_height);
  const Vec3 normal = rotate_z(-Vec3::UnitY(), deg_to_rad(s.tilt_deg));
  return MirrorPanel::oriented(center, normal, s.width, s.height);
}

inline Scene oaa_scene(const OaaSetup& s, bool with_mirror = true) {
  Scene scene;
  const MirrorPanel panel = oaa_panel(s);
  // Central forward beam after reflection, projected onto the ground plane.
  Vec3 out = reflect(Vec3::UnitY(), panel.normal);
  out.z() = 0.0;
  out.normalize();
  const Vec3 wall_center = Vec3(panel.center.x(), panel.center.y(), 0.0) + s.wall_standoff * out;
  const double yaw = std::atan2(out.y(), out.x());  // box x-axis along `out`
  scene.solids.push_back(
      SolidObstacle::box(wall_center + 0.1 * out, 0.2, s.wall_length, s.wall_height, yaw, s.wall_albedo));
  if (with_mirror) scene.mirrors.push_back(panel);
  return scene;
}

}  // namespace mirrorspoof
