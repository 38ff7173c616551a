#pragma once

// Longitudinal two-vehicle scenario: an ego vehicle whose perception runs on
// a (possibly attacked) LiDAR scan every tick, and a follower that reacts to
// the ego's braking after a fixed delay. Speeds integrate exactly under
// piecewise-constant deceleration and clamp at standstill.

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "mirrorspoof/errors.hpp"
#include "mirrorspoof/injection.hpp"
#include "mirrorspoof/kv_config.hpp"
#include "mirrorspoof/lidar_sim.hpp"
#include "mirrorspoof/models.hpp"
#include "mirrorspoof/rng.hpp"
#include "mirrorspoof/scenes.hpp"
#include "mirrorspoof/segmentation.hpp"

namespace mirrorspoof {

inline constexpr double kInfiniteTtc = std::numeric_limits<double>::infinity();

inline double kmh_to_ms(double kmh) { return kmh / 3.6; }

// Time to collision. Contact (gap <= 0) while closing reads as zero.
inline double ttc(double gap, double ego_speed, double follower_speed) {
  const double closing = follower_speed - ego_speed;
  if (!(closing > 0.0)) return kInfiniteTtc;
  return std::max(gap, 0.0) / closing;
}

struct VehicleState {
  double position = 0.0;  // m along the route
  double speed = 0.0;     // m/s, never negative
  double accel = 0.0;     // commanded, m/s^2 (negative when braking)

  // Advance by `dt` under constant `accel`, stopping at zero speed.
  void advance(double dt) {
    if (accel >= 0.0) {
      position += speed * dt + 0.5 * accel * dt * dt;
      speed += accel * dt;
      return;
    }
    const double decel = -accel;
    const double t_stop = speed / decel;
    if (t_stop <= dt) {
      position += speed * speed / (2.0 * decel);
      speed = 0.0;
    } else {
      position += speed * dt - 0.5 * decel * dt * dt;
      speed -= decel * dt;
    }
  }
};

struct ScenarioConfig {
  double tick = 0.05;
  double ego_speed_kmh = 25.0;
  double follower_speed_kmh = 25.0;
  double initial_gap = 8.0;
  double ego_decel = 8.0;
  double follower_decel = 6.0;
  double follower_delay = 1.2;
  double follower_trigger_decel = 2.0;  // ego decel the follower reacts to

  // Perception stub.
  int min_cluster_points = 15;
  double corridor_half_width = 2.0;
  double lookahead = 15.0;
  double ground_threshold = 0.15;
  double cluster_radius = 0.5;

  // Mirror placement: a panel at a fixed route position ahead of the ego's
  // start, offset sideways. It is only active once the ego is within
  // `mirror_reveal_distance` of it.
  bool attack = true;
  double mirror_ahead = 80.0;
  double mirror_lateral = 1.0;
  double mirror_theta = 30.0;
  double mirror_area = 0.18;
  double mirror_reveal_distance = kInfiniteTtc;

  // Scripted ego brake (seconds; negative disables). Bypasses perception.
  double forced_brake_time = -1.0;

  double max_time = 60.0;
  double post_collision_time = 2.0;
  std::uint64_t seed = 42;

  InjectionConfig injection;

  void validate() const {
    detail::require(tick > 0.0, "scenario: tick must be positive");
    detail::require(initial_gap > 0.0, "scenario: initial gap must be positive");
    detail::require(ego_decel > 0.0 && follower_decel > 0.0, "scenario: decelerations must be positive");
    detail::require(ego_speed_kmh >= 0.0 && follower_speed_kmh >= 0.0, "scenario: speeds must be non-negative");
    detail::require(follower_delay >= 0.0, "scenario: follower delay must be non-negative");
    detail::require(min_cluster_points >= 1, "scenario: min cluster points must be >= 1");
    detail::require(corridor_half_width > 0.0 && lookahead > 0.0, "scenario: corridor must be non-empty");
    detail::require(cluster_radius > 0.0, "scenario: cluster radius must be positive");
    detail::require(mirror_theta >= 0.0 && mirror_theta < 90.0, "scenario: mirror tilt must lie in [0, 90)");
    detail::require(mirror_area > 0.0, "scenario: mirror area must be positive");
    detail::require(max_time > 0.0, "scenario: max time must be positive");
    injection.validate();
  }
};

inline const std::set<std::string>& scenario_config_keys() {
  static const std::set<std::string> keys{
      "tick", "ego_speed_kmh", "follower_speed_kmh", "initial_gap", "ego_decel", "follower_decel",
      "follower_delay", "follower_trigger_decel", "min_cluster_points", "corridor_half_width", "lookahead",
      "ground_threshold", "cluster_radius", "attack", "mirror_ahead", "mirror_lateral", "mirror_theta",
      "mirror_area", "mirror_reveal_distance", "forced_brake_time", "max_time", "post_collision_time", "seed"};
  return keys;
}

inline ScenarioConfig scenario_from_kv(const KeyValueFile& kv, ScenarioConfig c = {}) {
  kv.reject_unknown(scenario_config_keys());
  kv.read("tick", c.tick);
  kv.read("ego_speed_kmh", c.ego_speed_kmh);
  kv.read("follower_speed_kmh", c.follower_speed_kmh);
  kv.read("initial_gap", c.initial_gap);
  kv.read("ego_decel", c.ego_decel);
  kv.read("follower_decel", c.follower_decel);
  kv.read("follower_delay", c.follower_delay);
  kv.read("follower_trigger_decel", c.follower_trigger_decel);
  kv.read("min_cluster_points", c.min_cluster_points);
  kv.read("corridor_half_width", c.corridor_half_width);
  kv.read("lookahead", c.lookahead);
  kv.read("ground_threshold", c.ground_threshold);
  kv.read("cluster_radius", c.cluster_radius);
  kv.read("attack", c.attack);
  kv.read("mirror_ahead", c.mirror_ahead);
  kv.read("mirror_lateral", c.mirror_lateral);
  kv.read("mirror_theta", c.mirror_theta);
  kv.read("mirror_area", c.mirror_area);
  kv.read("mirror_reveal_distance", c.mirror_reveal_distance);
  kv.read("forced_brake_time", c.forced_brake_time);
  kv.read("max_time", c.max_time);
  kv.read("post_collision_time", c.post_collision_time);
  if (kv.has("seed")) c.seed = static_cast<std::uint64_t>(kv.get_int("seed"));
  try {
    c.validate();
  } catch (const ContractViolation& e) {
    throw InputError(kv.name() + ": " + e.what());
  }
  return c;
}

struct ScenarioRow {
  double t = 0.0;
  double v_ego = 0.0;
  double v_follower = 0.0;
  double gap = 0.0;
  double ttc = kInfiniteTtc;
  std::int64_t n_injected = 0;
  std::vector<std::string> events;
};

struct ScenarioLog {
  std::vector<ScenarioRow> rows;
  // Exact event times (not rounded to ticks) where they happen.
  std::optional<double> attack_time;
  std::optional<double> ego_brake_time;
  std::optional<double> follower_brake_time;
  std::optional<double> ego_stop_time;
  std::optional<double> collision_time;  // first tick at which gap <= 0
  double min_ttc = kInfiniteTtc;
  double min_gap = kInfiniteTtc;
  std::int64_t max_injected = 0;

  bool collided() const { return collision_time.has_value(); }

  // Event names in the order they first appear.
  std::vector<std::string> event_sequence() const {
    std::vector<std::string> seq;
    for (const auto& r : rows) seq.insert(seq.end(), r.events.begin(), r.events.end());
    return seq;
  }
};

namespace detail {

// Points that the perception stub treats as obstacle evidence: above the
// ground threshold and inside the forward corridor (sensor frame).
inline std::vector<Vec3> corridor_points(const PointCloud& cloud, const ScenarioConfig& c, double mount) {
  std::vector<Vec3> out;
  for (const auto& p : cloud.points) {
    const Vec3& q = p.position;
    if (q.z() + mount <= c.ground_threshold) continue;
    if (std::abs(q.x()) > c.corridor_half_width || q.y() < 0.0 || q.y() > c.lookahead) continue;
    out.push_back(q);
  }
  return out;
}

}  // namespace detail

inline bool perceive_obstacle(const std::vector<Vec3>& corridor, const ScenarioConfig& c) {
  if (corridor.size() < static_cast<std::size_t>(c.min_cluster_points)) return false;
  ClusterOptions opt;
  opt.radius = c.cluster_radius;
  opt.min_points = static_cast<std::size_t>(c.min_cluster_points);
  return !cluster(corridor, opt).empty();
}

// Ray-traced artifact source for tilts outside the offset model's domain:
// the reference addition-attack array, placed `ahead` metres in front of
// the sensor and shifted sideways. Only virtual returns are kept.
inline PointCloud raytraced_artifacts(double ahead, double lateral, double theta_deg, double area,
                                      const LidarConfig& lidar) {
  OaaSetup s = OaaSetup::with_area(area);
  s.mirror_distance = ahead;
  s.tilt_deg = theta_deg;
  Scene scene = oaa_scene(s);
  scene.has_ground = false;
  for (auto& m : scene.mirrors) m.center.x() += lateral;
  for (auto& o : scene.solids) o.base.x() += lateral;
  PointCloud pc = scan(scene, SensorPose::at(0.0, 0.0, 0.0, lidar), lidar);
  PointCloud out;
  for (const auto& p : pc.points) {
    if (p.tag == PointTag::kVirtual) out.points.push_back(p);
  }
  return out;
}

class ScenarioRunner {
 public:
  explicit ScenarioRunner(ScenarioConfig config, LidarConfig lidar = {})
      : config_(std::move(config)), lidar_(std::move(lidar)) {
    config_.validate();
    // The road is flat and empty, so the native scan is the same every tick.
    Scene road;
    native_ = detail::corridor_points(scan(road, SensorPose::at(0.0, 0.0, 0.0, lidar_), lidar_), config_,
                                      lidar_.mount_height);
  }

  ScenarioLog run() {
    const ScenarioConfig& c = config_;
    SeededRng rng(c.seed);
    VehicleState ego{c.initial_gap, kmh_to_ms(c.ego_speed_kmh), 0.0};
    VehicleState fol{0.0, kmh_to_ms(c.follower_speed_kmh), 0.0};
    ScenarioLog log;
    std::optional<double> follower_onset;
    std::set<std::string> fired;
    auto emit = [&](ScenarioRow& row, const std::string& ev) {
      if (fired.insert(ev).second) row.events.push_back(ev);
    };

    const auto n_ticks = static_cast<long long>(std::ceil(c.max_time / c.tick - 1e-9));
    for (long long k = 0; k <= n_ticks; ++k) {
      const double t = static_cast<double>(k) * c.tick;
      ScenarioRow row;
      row.t = t;
      const double gap = ego.position - fol.position;
      if (gap <= 0.0 && !log.collision_time) {
        log.collision_time = t;
        emit(row, "collision");
      }

      // Perception on this tick's scan.
      if (!log.ego_brake_time) {
        bool brake = c.forced_brake_time >= 0.0 && t + 1e-12 >= c.forced_brake_time;
        if (c.attack) {
          const auto artifacts = attack_points(ego.position - c.initial_gap, rng, row.n_injected);
          if (row.n_injected > 0 && !log.attack_time) {
            log.attack_time = t;
            emit(row, "attack-trigger");
          }
          if (!brake) {
            std::vector<Vec3> corridor = native_;
            const auto extra = detail::corridor_points(artifacts, c, lidar_.mount_height);
            corridor.insert(corridor.end(), extra.begin(), extra.end());
            brake = perceive_obstacle(corridor, c);
          }
        } else if (!brake) {
          brake = perceive_obstacle(native_, c);
        }
        if (brake) {
          log.ego_brake_time = t;
          ego.accel = -c.ego_decel;
          emit(row, "ego-brake");
          if (c.ego_decel > c.follower_trigger_decel) follower_onset = t + c.follower_delay;
        }
      }
      if (follower_onset && t + 1e-12 >= *follower_onset) emit(row, "follower-brake");

      row.v_ego = ego.speed;
      row.v_follower = fol.speed;
      row.gap = gap;
      row.ttc = ttc(gap, ego.speed, fol.speed);
      log.min_ttc = std::min(log.min_ttc, row.ttc);
      log.min_gap = std::min(log.min_gap, gap);
      log.max_injected = std::max(log.max_injected, row.n_injected);
      log.rows.push_back(row);

      const bool both_stopped = ego.speed == 0.0 && fol.speed == 0.0;
      if (both_stopped && log.ego_brake_time) break;
      if (log.collision_time && t + 1e-12 >= *log.collision_time + c.post_collision_time) break;
      if (k == n_ticks) break;

      // Integrate to the next tick, splitting at the follower's brake onset.
      const double t_next = t + c.tick;
      double cursor = t;
      if (follower_onset && fol.accel == 0.0 && *follower_onset < t_next) {
        const double split = std::max(*follower_onset, t);
        advance_both(ego, fol, split - cursor, log, cursor);
        cursor = split;
        fol.accel = -c.follower_decel;
        log.follower_brake_time = *follower_onset;
      }
      advance_both(ego, fol, t_next - cursor, log, cursor);
    }
    return log;
  }

 private:
  // Artifact points for the ego at `travelled` metres from its start.
  PointCloud attack_points(double travelled, SeededRng& rng, std::int64_t& n_injected) const {
    const ScenarioConfig& c = config_;
    n_injected = 0;
    const double ahead = c.mirror_ahead - travelled;
    if (ahead <= 0.0 || ahead > c.mirror_reveal_distance) return {};
    if (c.mirror_theta < kMaxOffsetTiltDeg) {
      MirrorState s;
      s.d = std::hypot(ahead, c.mirror_lateral);
      s.theta = c.mirror_theta;
      s.area = c.mirror_area;
      auto res = inject(PointCloud{}, s, c.injection, rng);
      n_injected = res.report.n_injected;
      return std::move(res.cloud);
    }
    if (ahead > c.lookahead) return {};
    PointCloud pc = raytraced_artifacts(ahead, c.mirror_lateral, c.mirror_theta, c.mirror_area, lidar_);
    n_injected = static_cast<std::int64_t>(pc.size());
    return pc;
  }

  static void advance_both(VehicleState& ego, VehicleState& fol, double dt, ScenarioLog& log, double t0) {
    if (dt <= 0.0) return;
    const double v0 = ego.speed;
    ego.advance(dt);
    fol.advance(dt);
    if (!log.ego_stop_time && ego.accel < 0.0 && v0 > 0.0 && ego.speed == 0.0 && log.ego_brake_time) {
      // Exact standstill instant inside this interval.
      log.ego_stop_time = t0 + v0 / -ego.accel;
    }
  }

  ScenarioConfig config_;
  LidarConfig lidar_;
  std::vector<Vec3> native_;
};

inline ScenarioLog run_scenario(const ScenarioConfig& config, const LidarConfig& lidar = {}) {
  return ScenarioRunner(config, lidar).run();
}

// Closed-form outcome for simultaneous equal initial speeds with the ego
// braking at t = 0: the follower collides when its stopping distance exceeds
// the gap plus the ego's stopping distance. Exact when the follower brakes
// no harder than the ego, since the gap then never grows.
inline bool stopping_distance_collides(double speed, double gap, double ego_decel, double follower_decel,
                                       double follower_delay) {
  const double follower = speed * follower_delay + speed * speed / (2.0 * follower_decel);
  const double ego = speed * speed / (2.0 * ego_decel);
  return follower >= gap + ego;
}

// ---- CSV ---------------------------------------------------------------------

inline constexpr std::string_view kScenarioHeader = "t,v_ego,v_follower,gap,ttc,n_injected,event";

inline void write_scenario_csv(std::ostream& os, const ScenarioLog& log) {
  os << kScenarioHeader << '\n';
  for (const auto& r : log.rows) {
    std::string ev;
    for (const auto& e : r.events) ev += (ev.empty() ? "" : "|") + e;
    os << csv::format_g9(r.t) << ',' << csv::format_g9(r.v_ego) << ',' << csv::format_g9(r.v_follower) << ','
       << csv::format_g9(r.gap) << ',' << (std::isinf(r.ttc) ? std::string("inf") : csv::format_g9(r.ttc)) << ','
       << r.n_injected << ',' << ev << '\n';
  }
}

// One effectiveness row: mirror tilt and area with the attack revealed at
// distance d.
struct EffectivenessRow {
  MirrorState state;
  bool raytraced = false;
  bool triggered = false;
  bool emergency_brake = false;
  bool collision = false;
  std::int64_t max_injected = 0;
  double min_ttc = kInfiniteTtc;
};

inline EffectivenessRow evaluate_configuration(const MirrorState& s, ScenarioConfig base,
                                               const LidarConfig& lidar = {}) {
  s.validate();
  base.attack = true;
  base.mirror_theta = s.theta;
  base.mirror_area = s.area;
  base.mirror_reveal_distance = s.d;
  const ScenarioLog log = run_scenario(base, lidar);
  EffectivenessRow r;
  r.state = s;
  r.raytraced = s.theta >= kMaxOffsetTiltDeg;
  r.triggered = log.attack_time.has_value();
  r.emergency_brake = log.ego_brake_time.has_value();
  r.collision = log.collided();
  r.max_injected = log.max_injected;
  r.min_ttc = log.min_ttc;
  return r;
}

}  // namespace mirrorspoof
