#pragma once

#include <algorithm>
#include <deque>
#include <vector>

#include "mirrorspoof/errors.hpp"
#include "mirrorspoof/models.hpp"
#include "mirrorspoof/point_cloud.hpp"
#include "mirrorspoof/registration.hpp"
#include "mirrorspoof/spatial_index.hpp"

namespace mirrorspoof {

// Attacked points with no baseline point within `radius`. A radius of zero
// matches nothing, so every attacked point is returned.
inline PointCloud frame_difference(const PointCloud& attacked, const PointCloud& baseline, double radius = 0.10) {
  PointCloud out;
  out.frame = attacked.frame;
  out.timestamp = attacked.timestamp;
  if (radius <= 0.0 || baseline.empty()) {
    out.points = attacked.points;
    return out;
  }
  const VoxelIndex index(positions(baseline), radius);
  for (const auto& p : attacked.points) {
    if (!index.has_neighbor_within(p.position, radius)) out.points.push_back(p);
  }
  return out;
}

struct ClusterOptions {
  double radius = 0.5;
  std::size_t min_points = 5;
};

// Single-linkage radius clustering. Clusters are ordered by their lowest
// point index and each lists its indices in ascending order.
inline std::vector<std::vector<std::size_t>> cluster(const std::vector<Vec3>& points,
                                                     const ClusterOptions& options = {}) {
  detail::require(options.radius > 0.0, "cluster: radius must be positive");
  const VoxelIndex index(points, options.radius);
  std::vector<char> visited(points.size(), 0);
  std::vector<std::vector<std::size_t>> clusters;
  std::deque<std::size_t> frontier;
  for (std::size_t seed = 0; seed < points.size(); ++seed) {
    if (visited[seed]) continue;
    visited[seed] = 1;
    std::vector<std::size_t> members{seed};
    frontier.push_back(seed);
    while (!frontier.empty()) {
      const std::size_t cur = frontier.front();
      frontier.pop_front();
      index.for_each_within(points[cur], options.radius, [&](std::size_t nb) {
        if (!visited[nb]) {
          visited[nb] = 1;
          members.push_back(nb);
          frontier.push_back(nb);
        }
      });
    }
    if (members.size() >= options.min_points) {
      std::sort(members.begin(), members.end());
      clusters.push_back(std::move(members));
    }
  }
  return clusters;
}

inline std::vector<std::vector<std::size_t>> cluster(const PointCloud& cloud, const ClusterOptions& options = {}) {
  return cluster(positions(cloud), options);
}

inline PointCloud subset(const PointCloud& cloud, const std::vector<std::size_t>& indices) {
  PointCloud out;
  out.frame = cloud.frame;
  out.timestamp = cloud.timestamp;
  out.points.reserve(indices.size());
  for (auto i : indices) out.points.push_back(cloud.points[i]);
  return out;
}

inline Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

// Observed features of one artifact cluster. A detected cluster counts as
// an appearance, so P_app is 1. R is measured from the sensor, or from a
// point `z_reference` metres along the sensor's vertical axis.
inline ArtifactFeatures extract_features(const PointCloud& cluster_points, const MirrorState& state,
                                         double z_reference = 0.0) {
  state.validate();
  if (cluster_points.empty()) throw ContractViolation("extract_features: cluster is empty");
  const Vec3 c = centroid(positions(cluster_points));
  ArtifactFeatures f;
  f.R = (c - Vec3(0.0, 0.0, z_reference)).norm();
  f.X = c.x();
  f.N = static_cast<double>(cluster_points.size());
  f.P_app = 1.0;
  return f;
}

}  // namespace mirrorspoof
