#pragma once

// Scene description files. One element per line, `#` comments:
//
//   sensor   x=0 y=0 yaw=0                   (yaw in degrees)
//   ground   albedo=0.2 | ground off
//   cone     x= y= radius= height= [albedo=]
//   cylinder x= y= radius= height= [albedo=]
//   box      x= y= sx= sy= height= [yaw=] [albedo=]
//   mirror   x= y= z= width= height= (yaw= | nx= ny= nz=) [reflectivity=]
//
// A mirror given by `yaw` is vertical; yaw 0 faces a sensor looking along +y.
// Errors carry the file name and line number.

#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "mirrorspoof/errors.hpp"
#include "mirrorspoof/kv_config.hpp"
#include "mirrorspoof/lidar_sim.hpp"
#include "mirrorspoof/optics.hpp"
#include "mirrorspoof/point_cloud.hpp"

namespace mirrorspoof {

struct SceneFile {
  Scene scene;
  double sensor_x = 0.0;
  double sensor_y = 0.0;
  double sensor_yaw_deg = 0.0;

  SensorPose pose(const LidarConfig& cfg) const {
    return SensorPose::at(sensor_x, sensor_y, deg_to_rad(sensor_yaw_deg), cfg);
  }
};

namespace detail {

class SceneLine {
 public:
  SceneLine(std::map<std::string, std::string> kv, std::string where) : kv_(std::move(kv)), where_(std::move(where)) {}

  double num(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw InputError(where_ + ": missing '" + key + "'");
    used_.insert(key);
    return csv::parse_double(it->second, where_);
  }
  double num(const std::string& key, double fallback) const { return has(key) ? num(key) : fallback; }
  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  void finish() const {
    for (const auto& [k, v] : kv_) {
      if (!used_.count(k)) throw InputError(where_ + ": unknown attribute '" + k + "'");
    }
  }
  const std::string& where() const { return where_; }

 private:
  std::map<std::string, std::string> kv_;
  std::string where_;
  mutable std::set<std::string> used_;
};

}  // namespace detail

inline SceneFile parse_scene(std::istream& is, const std::string& name = "<scene>") {
  SceneFile out;
  std::string raw;
  std::size_t line_no = 0;
  bool sensor_seen = false, ground_seen = false;
  while (std::getline(is, raw)) {
    ++line_no;
    const std::string where = name + ":" + std::to_string(line_no);
    const auto hash = raw.find('#');
    std::istringstream ls(hash == std::string::npos ? raw : raw.substr(0, hash));
    std::string kind;
    if (!(ls >> kind)) continue;
    std::map<std::string, std::string> kv;
    std::string tok;
    bool ground_off = false;
    while (ls >> tok) {
      const auto eq = tok.find('=');
      if (kind == "ground" && tok == "off") {
        ground_off = true;
        continue;
      }
      if (eq == std::string::npos || eq == 0) throw InputError(where + ": expected key=value, got '" + tok + "'");
      const std::string key = tok.substr(0, eq);
      if (kv.count(key)) throw InputError(where + ": duplicate attribute '" + key + "'");
      kv[key] = tok.substr(eq + 1);
    }
    const detail::SceneLine line(std::move(kv), where);
    try {
      if (kind == "sensor") {
        if (sensor_seen) throw InputError(where + ": sensor declared twice");
        sensor_seen = true;
        out.sensor_x = line.num("x", 0.0);
        out.sensor_y = line.num("y", 0.0);
        out.sensor_yaw_deg = line.num("yaw", 0.0);
      } else if (kind == "ground") {
        if (ground_seen) throw InputError(where + ": ground declared twice");
        ground_seen = true;
        out.scene.has_ground = !ground_off;
        out.scene.ground_albedo = line.num("albedo", out.scene.ground_albedo);
        detail::require(out.scene.ground_albedo > 0.0 && out.scene.ground_albedo <= 1.0,
                        "ground albedo must lie in (0, 1]");
      } else if (kind == "cone" || kind == "cylinder") {
        const Vec3 base(line.num("x"), line.num("y"), 0.0);
        const double r = line.num("radius"), h = line.num("height");
        const double albedo = line.num("albedo", kind == "cone" ? 0.5 : 0.4);
        out.scene.solids.push_back(kind == "cone" ? SolidObstacle::cone(base, r, h, albedo)
                                                  : SolidObstacle::cylinder(base, r, h, albedo));
      } else if (kind == "box") {
        const Vec3 base(line.num("x"), line.num("y"), 0.0);
        out.scene.solids.push_back(SolidObstacle::box(base, line.num("sx"), line.num("sy"), line.num("height"),
                                                      deg_to_rad(line.num("yaw", 0.0)), line.num("albedo", 0.4)));
      } else if (kind == "mirror") {
        const Vec3 c(line.num("x"), line.num("y"), line.num("z"));
        Vec3 n;
        if (line.has("yaw")) {
          if (line.has("nx") || line.has("ny") || line.has("nz")) {
            throw InputError(where + ": give either yaw or nx/ny/nz, not both");
          }
          n = rotate_z(-Vec3::UnitY(), deg_to_rad(line.num("yaw")));
        } else {
          n = Vec3(line.num("nx"), line.num("ny"), line.num("nz"));
          if (n.norm() < 1e-12) throw InputError(where + ": mirror normal is zero");
        }
        out.scene.mirrors.push_back(
            MirrorPanel::oriented(c, n, line.num("width"), line.num("height"), line.num("reflectivity", 0.95)));
      } else {
        throw InputError(where + ": unknown element '" + kind + "'");
      }
    } catch (const ContractViolation& e) {
      throw InputError(where + ": " + e.what());
    }
    line.finish();
  }
  return out;
}

inline SceneFile load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scene file '" + path + "'");
  return parse_scene(in, path);
}

inline LidarConfig lidar_config_from_kv(const KeyValueFile& kv, LidarConfig c = {}) {
  kv.reject_unknown({"channels", "fov_min_deg", "fov_max_deg", "azimuth_step_deg", "max_range", "scan_rate_hz",
                     "mount_height", "detection_threshold"});
  kv.read("channels", c.channels);
  kv.read("fov_min_deg", c.fov_min_deg);
  kv.read("fov_max_deg", c.fov_max_deg);
  kv.read("azimuth_step_deg", c.azimuth_step_deg);
  kv.read("max_range", c.max_range);
  kv.read("scan_rate_hz", c.scan_rate_hz);
  kv.read("mount_height", c.mount_height);
  kv.read("detection_threshold", c.detection_threshold);
  try {
    c.validate();
  } catch (const ContractViolation& e) {
    throw InputError(kv.name() + ": " + e.what());
  }
  return c;
}

}  // namespace mirrorspoof
