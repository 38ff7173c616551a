#pragma once

// Model-driven artifact injection: a probabilistic trigger driven by the
// appearance window, followed by a Gaussian point cluster whose size and
// centroid come from the count and location models, merged into the native
// scan by set union.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "mirrorspoof/errors.hpp"
#include "mirrorspoof/lidar_sim.hpp"
#include "mirrorspoof/models.hpp"
#include "mirrorspoof/point_cloud.hpp"
#include "mirrorspoof/rng.hpp"

namespace mirrorspoof {

struct InjectionConfig {
  ArtifactModelParams params;
  Vec3 spread = Vec3(0.10, 0.10, 0.25);  // per-axis std-dev of the cluster, m
  double centroid_height = 1.0;          // above ground, m
  double mount_height = 2.2;             // sensor height above ground, m
  std::uint64_t seed = 42;

  void validate() const {
    params.validate();
    detail::require(spread.x() > 0.0 && spread.y() > 0.0 && spread.z() > 0.0,
                    "injection: cluster spreads must be positive");
  }
};

inline constexpr double kInjectedIntensity = 0.5;

struct InjectionReport {
  int frame = 0;
  bool triggered = false;
  double r = 0.0;      // uniform draw
  double p_app = 0.0;  // appearance probability it was compared against
  std::int64_t n_injected = 0;
  Vec3 centroid = Vec3::Zero();
  bool offset_clamped = false;
  std::string generator{SeededRng::kIdentity};
};

struct InjectionResult {
  PointCloud cloud;
  InjectionReport report;
};

// Mirror state seen from a sensor pose: range to the panel centre, angle
// between the panel normal and the line of sight, and panel area.
inline MirrorState extract_state(const SensorPose& sensor, const MirrorPanel& panel) {
  panel.validate();
  const Vec3 in_sensor = sensor.to_sensor(panel.center);
  if (in_sensor.y() <= 0.0) throw ContractViolation("extract_state: panel lies behind the sensor");
  const Vec3 los = panel.center - sensor.position;
  MirrorState s;
  s.d = los.norm();
  const double c = std::clamp(-los.normalized().dot(panel.normal), -1.0, 1.0);
  s.theta = rad_to_deg(std::acos(c));
  s.area = panel.area();
  if (s.theta >= 90.0) throw ContractViolation("extract_state: panel faces away from the sensor");
  return s;
}

// Sensor-frame centroid for a range/lateral pair. The forward axis takes all
// of the residual range; the height offset is applied afterwards.
inline Vec3 convert_to_3d(double R, double X, const InjectionConfig& config) {
  detail::require(R >= std::abs(X), "convert_to_3d: range must be at least |lateral offset|");
  return {X, std::sqrt(R * R - X * X), config.centroid_height - config.mount_height};
}

inline InjectionResult inject(const PointCloud& native, const MirrorState& state,
                              const InjectionConfig& config, SeededRng& rng) {
  config.validate();
  const ArtifactFeatures f = predict_features(state, config.params);

  InjectionResult out;
  out.cloud = native;
  out.report.frame = native.frame;
  out.report.p_app = f.P_app;
  out.report.r = rng.uniform();
  if (!(out.report.r < f.P_app)) return out;

  out.report.triggered = true;
  out.report.offset_clamped = f.offset_clamped;
  out.report.n_injected = static_cast<std::int64_t>(f.N);
  out.report.centroid = convert_to_3d(f.R, f.X, config);
  out.cloud.points.reserve(native.size() + static_cast<std::size_t>(f.N));
  for (std::int64_t i = 0; i < out.report.n_injected; ++i) {
    LidarPoint p;
    p.position = Vec3(rng.normal(out.report.centroid.x(), config.spread.x()),
                      rng.normal(out.report.centroid.y(), config.spread.y()),
                      rng.normal(out.report.centroid.z(), config.spread.z()));
    p.intensity = kInjectedIntensity;
    p.tag = PointTag::kVirtual;
    p.source = {SurfaceKind::kDiffuse, -1};
    out.cloud.points.push_back(p);
  }
  return out;
}

inline InjectionResult inject(const PointCloud& native, const MirrorState& state,
                              const InjectionConfig& config) {
  SeededRng rng(config.seed);
  return inject(native, state, config, rng);
}

// ---- report CSV ------------------------------------------------------------

inline constexpr std::string_view kReportHeader = "frame,triggered,r,N,cx,cy,cz";

inline void write_report_row(std::ostream& os, const InjectionReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%lld,%.9g,%.9g,%.9g\n", r.frame, r.triggered ? 1 : 0,
                r.r, static_cast<long long>(r.n_injected), r.centroid.x(), r.centroid.y(),
                r.centroid.z());
  os << buf;
}

}  // namespace mirrorspoof
