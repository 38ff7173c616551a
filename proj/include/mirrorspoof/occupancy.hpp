#pragma once

// 2-D counting occupancy grid over the ground plane. Points at or below the
// ground threshold are free-space evidence; points above it count towards
// occupancy. Cells with no evidence at all stay unknown.

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mirrorspoof/errors.hpp"
#include "mirrorspoof/kv_config.hpp"
#include "mirrorspoof/point_cloud.hpp"

namespace mirrorspoof {

struct GridConfig {
  double cell_size = 0.2;
  // 101 x 101 cells with the sensor at the centre of the middle one, so beams
  // along the sensor axes never fall on a cell edge.
  double extent_x = 20.2;  // m
  double extent_y = 20.2;  // m
  double origin_x = -10.1;  // sensor-frame corner of cell (0, 0)
  double origin_y = -10.1;
  double ground_threshold = 0.15;  // m above ground
  int occupancy_threshold = 3;     // points per cell
  int integration_frames = 5;      // most recent frames used
  double sensor_height = 2.2;      // converts sensor-frame z to height

  int width() const { return static_cast<int>(std::lround(extent_x / cell_size)); }
  int height() const { return static_cast<int>(std::lround(extent_y / cell_size)); }

  void validate() const {
    detail::require(cell_size > 0.0, "grid: cell size must be positive");
    detail::require(extent_x > 0.0 && extent_y > 0.0, "grid: extent must be positive");
    auto whole = [&](double e) { return std::abs(e / cell_size - std::round(e / cell_size)) <= 1e-9 * (e / cell_size); };
    detail::require(whole(extent_x) && whole(extent_y), "grid: extent must be a whole number of cells");
    detail::require(ground_threshold > 0.0, "grid: ground threshold must be positive");
    detail::require(occupancy_threshold > 0, "grid: occupancy threshold must be positive");
    detail::require(integration_frames > 0, "grid: integration frames must be positive");
  }
};

inline GridConfig grid_config_from_kv(const KeyValueFile& kv, GridConfig c = {}) {
  kv.reject_unknown({"cell_size", "extent_x", "extent_y", "origin_x", "origin_y", "ground_threshold",
                     "occupancy_threshold", "integration_frames", "sensor_height"});
  kv.read("cell_size", c.cell_size);
  kv.read("extent_x", c.extent_x);
  kv.read("extent_y", c.extent_y);
  kv.read("origin_x", c.origin_x);
  kv.read("origin_y", c.origin_y);
  kv.read("ground_threshold", c.ground_threshold);
  kv.read("occupancy_threshold", c.occupancy_threshold);
  kv.read("integration_frames", c.integration_frames);
  kv.read("sensor_height", c.sensor_height);
  try {
    c.validate();
  } catch (const ContractViolation& e) {
    throw InputError(kv.name() + ": " + e.what());
  }
  return c;
}

enum class CellState : char { kFree = 'F', kOccupied = 'O', kUnknown = 'U' };

struct OccupancyGrid {
  GridConfig config;
  std::vector<int> occupied_counts;  // row-major, row = y index
  std::vector<int> free_counts;

  int width() const { return config.width(); }
  int height() const { return config.height(); }
  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * width() + ix; }

  CellState at(int ix, int iy) const {
    const std::size_t i = index(ix, iy);
    if (occupied_counts[i] >= config.occupancy_threshold) return CellState::kOccupied;
    if (occupied_counts[i] > 0 || free_counts[i] > 0) return CellState::kFree;
    return CellState::kUnknown;
  }

  // Cell containing a sensor-frame (x, y), if inside the grid.
  bool locate(double x, double y, int& ix, int& iy) const {
    const double fx = std::floor((x - config.origin_x) / config.cell_size);
    const double fy = std::floor((y - config.origin_y) / config.cell_size);
    if (fx < 0 || fy < 0 || fx >= width() || fy >= height()) return false;
    ix = static_cast<int>(fx);
    iy = static_cast<int>(fy);
    return true;
  }

  std::size_t count(CellState s) const {
    std::size_t n = 0;
    for (int iy = 0; iy < height(); ++iy)
      for (int ix = 0; ix < width(); ++ix) n += at(ix, iy) == s ? 1 : 0;
    return n;
  }

  bool operator==(const OccupancyGrid& o) const {
    return occupied_counts == o.occupied_counts && free_counts == o.free_counts;
  }
};

inline OccupancyGrid build_grid(const std::vector<PointCloud>& frames, const GridConfig& config = {}) {
  config.validate();
  if (frames.empty()) throw InputError("occupancy grid needs at least one frame");
  OccupancyGrid g;
  g.config = config;
  const std::size_t cells = static_cast<std::size_t>(config.width()) * config.height();
  g.occupied_counts.assign(cells, 0);
  g.free_counts.assign(cells, 0);
  const std::size_t first =
      frames.size() > static_cast<std::size_t>(config.integration_frames) ? frames.size() - config.integration_frames : 0;
  for (std::size_t f = first; f < frames.size(); ++f) {
    for (const auto& p : frames[f].points) {
      int ix = 0, iy = 0;
      if (!g.locate(p.position.x(), p.position.y(), ix, iy)) continue;
      const double h = p.position.z() + config.sensor_height;
      (h <= config.ground_threshold ? g.free_counts : g.occupied_counts)[g.index(ix, iy)] += 1;
    }
  }
  return g;
}

inline double occupied_area(const OccupancyGrid& g) {
  return static_cast<double>(g.count(CellState::kOccupied)) * g.config.cell_size * g.config.cell_size;
}

// Cells whose square overlaps a disk in the sensor-frame ground plane.
inline std::vector<std::pair<int, int>> cells_overlapping_disk(const OccupancyGrid& g, double cx, double cy,
                                                                double radius) {
  std::vector<std::pair<int, int>> out;
  const double s = g.config.cell_size;
  for (int iy = 0; iy < g.height(); ++iy) {
    for (int ix = 0; ix < g.width(); ++ix) {
      const double x0 = g.config.origin_x + ix * s, y0 = g.config.origin_y + iy * s;
      const double nx = std::clamp(cx, x0, x0 + s), ny = std::clamp(cy, y0, y0 + s);
      if (std::hypot(nx - cx, ny - cy) < radius) out.emplace_back(ix, iy);
    }
  }
  return out;
}

// ---- text serialization ---------------------------------------------------------
//
// Header lines `key value`, a `data` line, then one row of F/O/U characters
// per y index, starting at the row nearest the origin.

inline void write_grid(std::ostream& os, const OccupancyGrid& g) {
  const GridConfig& c = g.config;
  os << "OCCGRID 1\n"
     << "width " << g.width() << '\n'
     << "height " << g.height() << '\n'
     << "resolution " << csv::format_g9(c.cell_size) << '\n'
     << "origin " << csv::format_g9(c.origin_x) << ' ' << csv::format_g9(c.origin_y) << '\n'
     << "ground_threshold " << csv::format_g9(c.ground_threshold) << '\n'
     << "occupancy_threshold " << c.occupancy_threshold << '\n'
     << "integration_frames " << c.integration_frames << '\n'
     << "sensor_height " << csv::format_g9(c.sensor_height) << '\n'
     << "data\n";
  std::string row;
  for (int iy = 0; iy < g.height(); ++iy) {
    row.clear();
    for (int ix = 0; ix < g.width(); ++ix) row.push_back(static_cast<char>(g.at(ix, iy)));
    os << row << '\n';
  }
}

// Cell states read back from a serialized grid, with its configuration.
struct GridImage {
  GridConfig config;
  std::vector<std::string> rows;

  CellState at(int ix, int iy) const { return static_cast<CellState>(rows[iy][ix]); }
};

inline GridImage read_grid(std::istream& is, const std::string& name = "<grid>") {
  GridImage img;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) { throw InputError(name + ":" + std::to_string(line_no) + ": " + msg); };
  ++line_no;
  if (!std::getline(is, line) || csv::trim(line) != "OCCGRID 1") fail("expected 'OCCGRID 1'");
  int w = -1, h = -1;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "data") break;
    auto num = [&]() {
      std::string v;
      if (!(ls >> v)) fail("missing value for '" + key + "'");
      return csv::parse_double(v, name + ":" + std::to_string(line_no));
    };
    if (key == "width") w = static_cast<int>(num());
    else if (key == "height") h = static_cast<int>(num());
    else if (key == "resolution") img.config.cell_size = num();
    else if (key == "origin") {
      img.config.origin_x = num();
      img.config.origin_y = num();
    } else if (key == "ground_threshold") img.config.ground_threshold = num();
    else if (key == "occupancy_threshold") img.config.occupancy_threshold = static_cast<int>(num());
    else if (key == "integration_frames") img.config.integration_frames = static_cast<int>(num());
    else if (key == "sensor_height") img.config.sensor_height = num();
    else fail("unknown header key '" + key + "'");
  }
  if (w <= 0 || h <= 0) fail("missing width/height");
  img.config.extent_x = w * img.config.cell_size;
  img.config.extent_y = h * img.config.cell_size;
  for (int iy = 0; iy < h; ++iy) {
    ++line_no;
    if (!std::getline(is, line)) fail("truncated grid body");
    line = csv::trim(line);
    if (static_cast<int>(line.size()) != w) fail("row has " + std::to_string(line.size()) + " cells, expected " + std::to_string(w));
    if (line.find_first_not_of("FOU") != std::string::npos) fail("cells must be F, O or U");
    img.rows.push_back(line);
  }
  return img;
}

}  // namespace mirrorspoof
