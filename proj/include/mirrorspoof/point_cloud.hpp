#pragma once

// Point clouds in the sensor frame (x right, y forward, z up) and their CSV
// exchange format:
//
//   frame,t,x,y,z,intensity,tag
//
// Values are printed with 9 significant digits; tags are direct/virtual/ground.

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mirrorspoof/errors.hpp"
#include "mirrorspoof/optics.hpp"

namespace mirrorspoof {

enum class PointTag { kDirect, kVirtual, kGround };

inline std::string_view to_string(PointTag tag) {
  switch (tag) {
    case PointTag::kDirect: return "direct";
    case PointTag::kVirtual: return "virtual";
    case PointTag::kGround: return "ground";
  }
  return "direct";
}

inline PointTag parse_tag(std::string_view s) {
  if (s == "direct") return PointTag::kDirect;
  if (s == "virtual") return PointTag::kVirtual;
  if (s == "ground") return PointTag::kGround;
  throw InputError("unknown point tag '" + std::string(s) + "'");
}

struct LidarPoint {
  Vec3 position = Vec3::Zero();
  double intensity = 0.0;
  // Ground-truth provenance. Never consumed by perception code.
  PointTag tag = PointTag::kDirect;
  // Surface that produced the geometry (the secondary surface for virtual
  // points). In-memory only; not part of the CSV format.
  SurfaceRef source;
};

struct PointCloud {
  int frame = 0;
  double timestamp = 0.0;
  std::vector<LidarPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

inline std::size_t count_tag(const PointCloud& cloud, PointTag tag) {
  std::size_t n = 0;
  for (const auto& p : cloud.points) n += p.tag == tag ? 1 : 0;
  return n;
}

namespace csv {

inline constexpr std::string_view kPointHeader = "frame,t,x,y,z,intensity,tag";

inline std::string format_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw InputError("");
    return v;
  } catch (const std::exception&) {
    throw InputError(where + ": expected a number, got '" + s + "'");
  }
}

inline long long parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw InputError("");
    return v;
  } catch (const std::exception&) {
    throw InputError(where + ": expected an integer, got '" + s + "'");
  }
}

}  // namespace csv

inline void write_point_csv_header(std::ostream& os) { os << csv::kPointHeader << '\n'; }

inline void write_point_rows(std::ostream& os, const PointCloud& cloud) {
  const std::string t = csv::format_g9(cloud.timestamp);
  for (const auto& p : cloud.points) {
    os << cloud.frame << ',' << t << ',' << csv::format_g9(p.position.x()) << ','
       << csv::format_g9(p.position.y()) << ',' << csv::format_g9(p.position.z()) << ','
       << csv::format_g9(p.intensity) << ',' << to_string(p.tag) << '\n';
  }
}

inline void write_point_csv(std::ostream& os, const std::vector<PointCloud>& frames) {
  write_point_csv_header(os);
  for (const auto& f : frames) write_point_rows(os, f);
}

// Frames are returned in order of first appearance. A frame with no points
// cannot be represented and therefore never appears.
inline std::vector<PointCloud> read_point_csv(std::istream& is, const std::string& name = "<csv>") {
  std::vector<PointCloud> frames;
  std::map<long long, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line == csv::kPointHeader) continue;
    }
    const std::string where = name + ":" + std::to_string(line_no);
    const auto cols = csv::split(line);
    if (cols.size() != 7) {
      throw InputError(where + ": expected 7 columns, got " + std::to_string(cols.size()));
    }
    const long long frame = csv::parse_int(cols[0], where);
    const double t = csv::parse_double(cols[1], where);
    auto it = index.find(frame);
    if (it == index.end()) {
      it = index.emplace(frame, frames.size()).first;
      PointCloud pc;
      pc.frame = static_cast<int>(frame);
      pc.timestamp = t;
      frames.push_back(std::move(pc));
    }
    LidarPoint p;
    p.position = Vec3(csv::parse_double(cols[2], where), csv::parse_double(cols[3], where),
                      csv::parse_double(cols[4], where));
    p.intensity = csv::parse_double(cols[5], where);
    try {
      p.tag = parse_tag(cols[6]);
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
    p.source.kind = p.tag == PointTag::kGround ? SurfaceKind::kGround : SurfaceKind::kDiffuse;
    frames[it->second].points.push_back(p);
  }
  return frames;
}

inline std::vector<PointCloud> load_point_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open point-cloud CSV '" + path + "'");
  return read_point_csv(in, path);
}

inline void save_point_csv(const std::string& path, const std::vector<PointCloud>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  write_point_csv(out, frames);
}

}  // namespace mirrorspoof
