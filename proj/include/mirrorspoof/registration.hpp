#pragma once

// Point-to-point ICP with trimmed pairing. Each iteration pairs every source
// point with its nearest target point, drops the worst fraction of pairs and
// any pair longer than the rejection distance, and solves the rigid alignment
// of the rest in closed form (centroids + SVD).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mirrorspoof/errors.hpp"
#include "mirrorspoof/optics.hpp"
#include "mirrorspoof/point_cloud.hpp"
#include "mirrorspoof/spatial_index.hpp"

namespace mirrorspoof {

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  // this ∘ other
  RigidTransform compose(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  double rotation_angle() const {
    const double c = std::clamp(0.5 * (rotation.trace() - 1.0), -1.0, 1.0);
    return std::acos(c);
  }
};

struct IcpOptions {
  int max_iterations = 50;
  double tolerance = 1e-9;    // stop when the residual drops by less than this
  double trim_fraction = 0.10;
  double cell_size = 0.5;     // voxel size of the target index
  double max_pair_distance = 0.5;  // pairs farther apart never count
};

struct IcpResult {
  RigidTransform transform;  // maps source into the target frame
  double residual = 0.0;     // RMS distance over the retained pairs
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;
};

// Closed-form least-squares rigid transform mapping `from` onto `to`.
inline RigidTransform best_fit_transform(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  const auto n = static_cast<double>(from.size());
  Vec3 cf = Vec3::Zero(), ct = Vec3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) {
    cf += from[i];
    ct += to[i];
  }
  cf /= n;
  ct /= n;
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) h += (from[i] - cf) * (to[i] - ct).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d fix = Eigen::Matrix3d::Identity();
  fix(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  RigidTransform t;
  t.rotation = v * fix * u.transpose();
  t.translation = ct - t.rotation * cf;
  return t;
}

inline IcpResult icp_align(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                           const IcpOptions& options = {}) {
  if (source.size() < 3 || target.size() < 3) {
    throw ContractViolation("icp_align: both clouds need at least 3 points");
  }
  detail::require(options.trim_fraction >= 0.0 && options.trim_fraction < 1.0,
                  "icp_align: trim fraction must lie in [0, 1)");
  detail::require(options.max_pair_distance > 0.0, "icp_align: rejection distance must be positive");
  const VoxelIndex index(target, options.cell_size);
  const std::size_t keep =
      std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil((1.0 - options.trim_fraction) * source.size())));

  IcpResult result;
  std::vector<Vec3> moved(source.size());
  std::vector<std::pair<double, std::size_t>> pairs(source.size());
  std::vector<std::size_t> partner(source.size());
  std::vector<Vec3> from, to;
  double previous = std::numeric_limits<double>::infinity();

  for (int iter = 0;; ++iter) {
    for (std::size_t i = 0; i < source.size(); ++i) {
      moved[i] = result.transform.apply(source[i]);
      // Pairs beyond the rejection distance are never used, so skip the search past it.
      const auto nn = index.nearest(moved[i], options.max_pair_distance);
      partner[i] = nn ? nn->index : 0;
      pairs[i] = {nn ? nn->distance : std::numeric_limits<double>::infinity(), i};
    }
    std::nth_element(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(keep - 1), pairs.end());
    std::size_t used = keep;
    if (pairs[keep - 1].first > options.max_pair_distance) {
      std::sort(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(keep));
      used = static_cast<std::size_t>(
          std::upper_bound(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(keep),
                           std::make_pair(options.max_pair_distance, source.size())) -
          pairs.begin());
      if (used < 3) {
        // Nothing to align against; keep the current estimate.
        result.residual = std::numeric_limits<double>::infinity();
        result.residual_history.push_back(result.residual);
        result.iterations = iter;
        break;
      }
    }
    double sum2 = 0.0;
    from.clear();
    to.clear();
    for (std::size_t k = 0; k < used; ++k) {
      const std::size_t i = pairs[k].second;
      sum2 += pairs[k].first * pairs[k].first;
      from.push_back(moved[i]);
      to.push_back(target[partner[i]]);
    }
    const double residual = std::sqrt(sum2 / static_cast<double>(used));
    result.residual_history.push_back(residual);
    result.residual = residual;
    result.iterations = iter;
    if (previous - residual < options.tolerance) {
      result.converged = true;
      break;
    }
    if (iter >= options.max_iterations) break;
    previous = residual;
    result.transform = best_fit_transform(from, to).compose(result.transform);
  }
  return result;
}

inline std::vector<Vec3> positions(const PointCloud& cloud) {
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points) out.push_back(p.position);
  return out;
}

inline IcpResult icp_align(const PointCloud& source, const PointCloud& target, const IcpOptions& options = {}) {
  return icp_align(positions(source), positions(target), options);
}

inline PointCloud transformed(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out = cloud;
  for (auto& p : out.points) p.position = t.apply(p.position);
  return out;
}

}  // namespace mirrorspoof
