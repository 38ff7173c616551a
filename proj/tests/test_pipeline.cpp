#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <filesystem>
#include <fstream>
#include <random>

#include "mirrorspoof/campaign.hpp"
#include "mirrorspoof/registration.hpp"
#include "mirrorspoof/scenes.hpp"
#include "mirrorspoof/segmentation.hpp"
#include "mirrorspoof/spatial_index.hpp"

using namespace mirrorspoof;
namespace fs = std::filesystem;

namespace {

// A structured cloud: ground patch, two walls and a pole.
std::vector<Vec3> structured_cloud(std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts;
  for (int i = 0; i < 600; ++i) pts.emplace_back(8 * u(g) - 4, 10 * u(g), 0.0);
  for (int i = 0; i < 400; ++i) pts.emplace_back(-4.0, 10 * u(g), 3 * u(g));
  for (int i = 0; i < 400; ++i) pts.emplace_back(8 * u(g) - 4, 10.0, 3 * u(g));
  for (int i = 0; i < 100; ++i) pts.emplace_back(1.0 + 0.1 * u(g), 5.0 + 0.1 * u(g), 2 * u(g));
  return pts;
}

RigidTransform make_transform(double yaw_deg, const Vec3& t) {
  RigidTransform x;
  x.rotation = Eigen::AngleAxisd(deg_to_rad(yaw_deg), Vec3::UnitZ()).toRotationMatrix();
  x.translation = t;
  return x;
}

PointCloud to_cloud(const std::vector<Vec3>& pts, PointTag tag = PointTag::kDirect) {
  PointCloud pc;
  for (const auto& p : pts) pc.points.push_back({p, 0.5, tag, {}});
  return pc;
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mirrorspoof_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(VoxelIndex, NearestMatchesBruteForce) {
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<Vec3> pts;
  for (int i = 0; i < 2000; ++i) pts.emplace_back(u(g), u(g), u(g));
  const VoxelIndex index(pts, 0.7);
  for (int q = 0; q < 300; ++q) {
    const Vec3 x(1.5 * u(g), 1.5 * u(g), 1.5 * u(g));
    double best = 1e300;
    for (const auto& p : pts) best = std::min(best, (p - x).norm());
    const auto nn = index.nearest(x);
    ASSERT_TRUE(nn);
    ASSERT_NEAR(nn->distance, best, 1e-12);
  }
}

TEST(Icp, IdentityOnEqualClouds) {
  const auto pts = structured_cloud(2);
  const auto res = icp_align(pts, pts);
  EXPECT_NEAR(res.residual, 0.0, 1e-12);
  EXPECT_NEAR(res.transform.rotation_angle(), 0.0, 1e-9);
  EXPECT_NEAR(res.transform.translation.norm(), 0.0, 1e-9);
  EXPECT_TRUE(res.converged);
}

TEST(Icp, RecoversKnownRigidMotion) {
  const auto target = structured_cloud(3);
  const RigidTransform truth = make_transform(2.0, Vec3(0.05, 0.03, 0.0));
  // source = truth^-1 (target), so aligning source onto target recovers truth.
  std::vector<Vec3> source;
  for (const auto& p : target) source.push_back(truth.rotation.transpose() * (p - truth.translation));
  IcpOptions opt;
  opt.trim_fraction = 0.0;
  opt.max_iterations = 100;
  const auto res = icp_align(source, target, opt);
  const Eigen::Matrix3d dr = res.transform.rotation * truth.rotation.transpose();
  EXPECT_LT(std::acos(std::clamp(0.5 * (dr.trace() - 1.0), -1.0, 1.0)), 1e-3);
  EXPECT_LT((res.transform.translation - truth.translation).norm(), 1e-3);
}

TEST(Icp, TrimmedPairingToleratesOutliers) {
  const auto target = structured_cloud(4);
  const RigidTransform truth = make_transform(1.0, Vec3(0.04, -0.02, 0.01));
  std::vector<Vec3> source;
  for (const auto& p : target) source.push_back(truth.rotation.transpose() * (p - truth.translation));
  std::mt19937_64 g(9);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  const std::size_t n_out = source.size() / 20;
  for (std::size_t i = 0; i < n_out; ++i) source.emplace_back(u(g), u(g) + 5.0, std::abs(u(g)));
  const auto res = icp_align(source, target);
  EXPECT_LT(res.residual, 0.05);
  double worst = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    worst = std::max(worst, (res.transform.apply(source[i]) - target[i]).norm());
  }
  EXPECT_LT(worst, 1e-2);
}

TEST(Icp, ResidualHistoryNeverIncreases) {
  const auto target = structured_cloud(5);
  const RigidTransform truth = make_transform(3.0, Vec3(0.1, 0.05, 0.0));
  std::vector<Vec3> source;
  for (const auto& p : target) source.push_back(truth.apply(p));
  const auto res = icp_align(source, target);
  for (std::size_t i = 1; i < res.residual_history.size(); ++i) {
    EXPECT_LE(res.residual_history[i], res.residual_history[i - 1] + 1e-12);
  }
}

TEST(Icp, TooFewPointsIsAnError) {
  const std::vector<Vec3> two{Vec3::Zero(), Vec3::UnitX()};
  EXPECT_THROW(icp_align(two, structured_cloud(1)), ContractViolation);
  EXPECT_THROW(icp_align(structured_cloud(1), two), ContractViolation);
}

TEST(FrameDifference, IdenticalFramesAreEmpty) {
  const PointCloud pc = to_cloud(structured_cloud(6));
  EXPECT_EQ(frame_difference(pc, pc).size(), 0u);
}

TEST(FrameDifference, RecoversInjectedCluster) {
  const PointCloud base = to_cloud(structured_cloud(7));
  PointCloud attacked = base;
  SeededRng rng(3);
  std::size_t injected = 0;
  for (int i = 0; i < 120; ++i) {
    attacked.points.push_back({Vec3(rng.normal(0.0, 0.1), rng.normal(4.0, 0.1), rng.normal(1.2, 0.2)), 0.5,
                               PointTag::kVirtual, {}});
    ++injected;
  }
  const PointCloud diff = frame_difference(attacked, base, 0.10);
  EXPECT_EQ(diff.size(), injected);
  for (const auto& p : diff.points) EXPECT_EQ(p.tag, PointTag::kVirtual);
}

TEST(FrameDifference, ZeroRadiusReturnsEverything) {
  const PointCloud pc = to_cloud(structured_cloud(8));
  EXPECT_EQ(frame_difference(pc, pc, 0.0).size(), pc.size());
}

TEST(Cluster, TwoSeparatedBlobs) {
  std::vector<Vec3> pts;
  SeededRng rng(1);
  for (int i = 0; i < 40; ++i) pts.emplace_back(rng.normal(0, 0.05), rng.normal(0, 0.05), 0);
  for (int i = 0; i < 40; ++i) pts.emplace_back(rng.normal(5, 0.05), rng.normal(0, 0.05), 0);
  const auto c = cluster(pts, {0.5, 5});
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].size(), 40u);
  EXPECT_EQ(c[1].size(), 40u);
}

TEST(Cluster, SparseNoiseYieldsNothing) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) pts.emplace_back(2.0 * i, 2.0 * j, 0.0);
  EXPECT_TRUE(cluster(pts, {0.5, 5}).empty());
}

TEST(Cluster, InjectedGaussianStaysTogether) {
  std::vector<Vec3> pts;
  SeededRng rng(2);
  for (int i = 0; i < 100; ++i) pts.emplace_back(rng.normal(0, 0.1), rng.normal(3, 0.1), rng.normal(0, 0.1));
  const auto c = cluster(pts, {0.5, 5});
  ASSERT_GE(c.size(), 1u);
  EXPECT_GE(c[0].size(), 99u);
}

TEST(Cluster, RejectsNonPositiveRadius) {
  EXPECT_THROW(cluster(std::vector<Vec3>{Vec3::Zero()}, {0.0, 1}), ContractViolation);
}

TEST(ExtractFeatures, Examples) {
  const MirrorState s{2.0, 20.0, 0.18};
  const auto one = extract_features(to_cloud({Vec3(3, 4, 0)}), s);
  EXPECT_DOUBLE_EQ(one.R, 5.0);
  EXPECT_DOUBLE_EQ(one.X, 3.0);
  EXPECT_DOUBLE_EQ(one.N, 1.0);
  const auto pair = extract_features(to_cloud({Vec3(1, 4, 0), Vec3(-1, 4, 0)}), s);
  EXPECT_DOUBLE_EQ(pair.X, 0.0);
  EXPECT_DOUBLE_EQ(pair.R, 4.0);
  EXPECT_THROW(extract_features(PointCloud{}, s), ContractViolation);
}

TEST(ExtractFeatures, InjectedClusterRoundTrip) {
  InjectionConfig cfg;
  cfg.seed = 21;
  const MirrorState s{2.0, 15.0, 0.6};
  const auto res = inject(PointCloud{}, s, cfg);
  ASSERT_TRUE(res.report.triggered);
  const double n = static_cast<double>(res.report.n_injected);
  const auto f = extract_features(res.cloud, s, cfg.centroid_height - cfg.mount_height);
  const auto model = predict_features(s, cfg.params);
  EXPECT_EQ(f.N, model.N);
  EXPECT_NEAR(f.X, model.X, 4 * cfg.spread.x() / std::sqrt(n));
  EXPECT_NEAR(f.R, model.R, 4 * cfg.spread.norm() / std::sqrt(n));
}

TEST(Campaign, ManifestParsingAndErrors) {
  const fs::path dir = temp_dir("manifest");
  {
    std::ofstream m(dir / "c.csv");
    m << "d,theta,area,baseline_csv,attacked_csv\n# comment\n2.0,10,0.18,b.csv,a.csv\n";
  }
  const auto man = load_campaign((dir / "c.csv").string());
  ASSERT_EQ(man.entries.size(), 1u);
  EXPECT_EQ(man.entries[0].baseline_csv, (dir / "b.csv").string());
  {
    std::ofstream m(dir / "bad.csv");
    m << "2.0,10,0.18,b.csv\n";
  }
  try {
    load_campaign((dir / "bad.csv").string());
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.csv:1"), std::string::npos);
  }
  {
    std::ofstream m(dir / "neg.csv");
    m << "-2.0,10,0.18,b.csv,a.csv\n";
  }
  EXPECT_THROW(load_campaign((dir / "neg.csv").string()), InputError);
  EXPECT_THROW(process_campaign(CampaignManifest{}), InputError);
}

TEST(Campaign, SyntheticCampaignYieldsModelFeatures) {
  const fs::path dir = temp_dir("synthetic");
  LidarConfig lidar;
  lidar.channels = 16;
  lidar.azimuth_step_deg = 360.0 / 256.0;
  const PointCloud baseline = scan(ora_baseline_scene(), SensorPose::at(0, 0, 0, lidar), lidar);
  InjectionConfig cfg;
  const std::vector<MirrorState> states{{1.0, 20.0, 0.6}, {6.0, 20.0, 0.6}};
  const auto path = write_synthetic_campaign(dir.string(), states, 4, baseline, cfg);
  CampaignOptions opt;
  opt.z_reference = cfg.centroid_height - cfg.mount_height;
  const auto cs = process_campaign(load_campaign(path), opt);
  EXPECT_EQ(cs.frames, 8u);
  ASSERT_EQ(cs.appearance.size(), 2u);
  EXPECT_DOUBLE_EQ(cs.appearance[0].features.P_app, 1.0);  // deep inside the window
  EXPECT_DOUBLE_EQ(cs.appearance[1].features.P_app, 0.0);  // far outside
  ASSERT_EQ(cs.artifacts.size(), 4u);
  const auto model = predict_features(states[0], cfg.params);
  for (const auto& s : cs.artifacts) {
    EXPECT_EQ(s.features.N, model.N);
    EXPECT_NEAR(s.features.R, model.R, 0.05);
    EXPECT_NEAR(s.features.X, model.X, 0.05);
  }
}
