#pragma once

// Uniform voxel hash over a fixed point set for radius and nearest-neighbour
// queries. Cell size is normally the search radius.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "mirrorspoof/errors.hpp"
#include "mirrorspoof/optics.hpp"

namespace mirrorspoof {

class VoxelIndex {
 public:
  VoxelIndex(std::vector<Vec3> points, double cell_size)
      : points_(std::move(points)), cell_(cell_size) {
    detail::require(cell_size > 0.0, "VoxelIndex: cell size must be positive");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const Key k = key_of(points_[i]);
      cells_[hash(k)].push_back({k, i});
      extend_bounds(k);
    }
  }

  const std::vector<Vec3>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }

  // Indices of all points with |p - q| <= radius.
  template <typename Fn>
  void for_each_within(const Vec3& q, double radius, Fn&& fn) const {
    const int reach = static_cast<int>(std::ceil(radius / cell_));
    const Key c = key_of(q);
    const double r2 = radius * radius;
    for (int dx = -reach; dx <= reach; ++dx)
      for (int dy = -reach; dy <= reach; ++dy)
        for (int dz = -reach; dz <= reach; ++dz) {
          visit_cell({c.x + dx, c.y + dy, c.z + dz}, [&](std::size_t idx) {
            if ((points_[idx] - q).squaredNorm() <= r2) fn(idx);
          });
        }
  }

  struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;
  };

  // Exact nearest neighbour by expanding shells of cells, optionally limited
  // to `max_distance`.
  std::optional<Neighbor> nearest(const Vec3& q,
                                  double max_distance = std::numeric_limits<double>::infinity()) const {
    if (points_.empty()) return std::nullopt;
    const Key c = key_of(q);
    double best2 = max_distance * max_distance;
    std::optional<std::size_t> best;
    const int max_shell = shell_limit(c);
    for (int shell = 0; shell <= max_shell; ++shell) {
      // Points in shell s are at least (s - 1) * cell away from q.
      if (shell > 0) {
        if (best && best2 == 0.0) break;  // exact hit; equal points share a cell
        const double lower = (shell - 1) * cell_;
        if (lower * lower > best2 || (!best && lower * lower >= best2)) break;
      }
      auto visit = [&](std::int64_t dx, std::int64_t dy, std::int64_t dz) {
        visit_cell({c.x + dx, c.y + dy, c.z + dz}, [&](std::size_t idx) {
          const double d2 = (points_[idx] - q).squaredNorm();
          if (d2 <= best2 && (!best || d2 < best2 || idx < *best)) {
            best2 = d2;
            best = idx;
          }
        });
      };
      for (int dx = -shell; dx <= shell; ++dx)
        for (int dy = -shell; dy <= shell; ++dy) {
          if (std::abs(dx) == shell || std::abs(dy) == shell) {
            for (int dz = -shell; dz <= shell; ++dz) visit(dx, dy, dz);
          } else if (shell > 0) {
            visit(dx, dy, -shell);
            visit(dx, dy, shell);
          } else {
            visit(0, 0, 0);
          }
        }
    }
    if (!best) return std::nullopt;
    return Neighbor{*best, std::sqrt(best2)};
  }

  bool has_neighbor_within(const Vec3& q, double radius) const {
    const int reach = static_cast<int>(std::ceil(radius / cell_));
    const Key c = key_of(q);
    const double r2 = radius * radius;
    // Own cell first: it holds the match in the common case.
    if (any_in_cell(c, q, r2)) return true;
    for (int dx = -reach; dx <= reach; ++dx)
      for (int dy = -reach; dy <= reach; ++dy)
        for (int dz = -reach; dz <= reach; ++dz) {
          if ((dx || dy || dz) && any_in_cell({c.x + dx, c.y + dy, c.z + dz}, q, r2)) return true;
        }
    return false;
  }

 private:
  struct Key {
    std::int64_t x, y, z;
    bool operator==(const Key&) const = default;
  };
  struct Slot {
    Key key;
    std::size_t index;
  };

  Key key_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
            static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }

  static std::uint64_t hash(const Key& k) {
    return static_cast<std::uint64_t>(k.x) * 73856093ULL ^ static_cast<std::uint64_t>(k.y) * 19349663ULL ^
           static_cast<std::uint64_t>(k.z) * 83492791ULL;
  }

  template <typename Fn>
  void visit_cell(const Key& k, Fn&& fn) const {
    const auto it = cells_.find(hash(k));
    if (it == cells_.end()) return;
    for (const auto& slot : it->second)
      if (slot.key == k) fn(slot.index);
  }

  bool any_in_cell(const Key& k, const Vec3& q, double r2) const {
    const auto it = cells_.find(hash(k));
    if (it == cells_.end()) return false;
    for (const auto& slot : it->second)
      if (slot.key == k && (points_[slot.index] - q).squaredNorm() <= r2) return true;
    return false;
  }

  void extend_bounds(const Key& k) {
    lo_ = {std::min(lo_.x, k.x), std::min(lo_.y, k.y), std::min(lo_.z, k.z)};
    hi_ = {std::max(hi_.x, k.x), std::max(hi_.y, k.y), std::max(hi_.z, k.z)};
  }

  // Shell radius beyond which no occupied cell exists.
  int shell_limit(const Key& c) const {
    const std::int64_t span = std::max({std::abs(c.x - lo_.x), std::abs(c.x - hi_.x), std::abs(c.y - lo_.y),
                                        std::abs(c.y - hi_.y), std::abs(c.z - lo_.z), std::abs(c.z - hi_.z)});
    return static_cast<int>(span);
  }

  std::vector<Vec3> points_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<Slot>> cells_;
  Key lo_{std::numeric_limits<std::int64_t>::max(), std::numeric_limits<std::int64_t>::max(),
          std::numeric_limits<std::int64_t>::max()};
  Key hi_{std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::min(),
          std::numeric_limits<std::int64_t>::min()};
};

}  // namespace mirrorspoof
