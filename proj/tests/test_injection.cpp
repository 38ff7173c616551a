#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mirrorspoof/injection.hpp"
#include "mirrorspoof/lidar_sim.hpp"

using namespace mirrorspoof;

namespace {

PointCloud small_native() {
  PointCloud pc;
  pc.frame = 4;
  for (int i = 0; i < 50; ++i) pc.points.push_back({Vec3(0.1 * i, 10.0, -2.2), 0.3, PointTag::kGround, {}});
  return pc;
}

}  // namespace

TEST(ExtractState, PanelFacingTheSensor) {
  SensorPose pose;
  pose.position = Vec3::Zero();
  const Vec3 c(0, 5, 1);
  const auto panel = MirrorPanel::oriented(c, -c.normalized(), 0.6, 0.3);
  const MirrorState s = extract_state(pose, panel);
  EXPECT_NEAR(s.d, std::sqrt(26.0), 1e-12);
  EXPECT_NEAR(s.theta, 0.0, 1e-6);
  EXPECT_NEAR(s.area, 0.18, 1e-15);
}

TEST(ExtractState, TiltFromNormalAgainstLineOfSight) {
  SensorPose pose;
  pose.position = Vec3::Zero();
  const Vec3 c(0, 5, 1);
  const auto panel = MirrorPanel::oriented(c, -Vec3::UnitY(), 0.6, 0.6);
  const MirrorState s = extract_state(pose, panel);
  const double expected = rad_to_deg(std::acos(Vec3::UnitY().dot(c.normalized())));
  EXPECT_NEAR(s.theta, expected, 1e-9);
  EXPECT_NEAR(s.area, 0.36, 1e-15);
}

TEST(ExtractState, PanelBehindSensorIsAnError) {
  SensorPose pose;
  const auto panel = MirrorPanel::oriented(Vec3(0, -5, 2.2), Vec3::UnitY(), 0.6, 0.3);
  EXPECT_THROW(extract_state(pose, panel), ContractViolation);
}

TEST(ConvertTo3d, Examples) {
  const InjectionConfig cfg;
  const double z0 = cfg.centroid_height - cfg.mount_height;
  EXPECT_NEAR(z0, -1.2, 1e-15);
  EXPECT_NEAR((convert_to_3d(5, 0, cfg) - Vec3(0, 5, z0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((convert_to_3d(5, 3, cfg) - Vec3(3, 4, z0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((convert_to_3d(2.5, 2.5, cfg) - Vec3(2.5, 0, z0)).norm(), 0.0, 1e-12);
  EXPECT_THROW(convert_to_3d(2.0, 3.0, cfg), ContractViolation);
}

TEST(Inject, OutsideWindowLeavesInputUnchanged) {
  const PointCloud native = small_native();
  InjectionConfig cfg;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    cfg.seed = seed;
    const auto res = inject(native, {10.0, 30.0, 0.18}, cfg);
    ASSERT_FALSE(res.report.triggered);
    ASSERT_EQ(res.report.n_injected, 0);
    ASSERT_EQ(res.cloud.size(), native.size());
  }
}

TEST(Inject, InsideWindowAppendsPointCount) {
  const PointCloud native = small_native();
  InjectionConfig cfg;
  cfg.seed = 42;
  const MirrorState s{2.4, 30.0, 0.18};
  const auto res = inject(native, s, cfg);
  ASSERT_TRUE(res.report.triggered);
  EXPECT_EQ(res.report.n_injected, point_count(s, cfg.params));
  EXPECT_EQ(res.cloud.size(), native.size() + 163u);
  EXPECT_EQ(res.cloud.frame, native.frame);
  // Native order preserved, injected points appended and tagged.
  for (std::size_t i = 0; i < native.size(); ++i) {
    ASSERT_EQ(res.cloud.points[i].position, native.points[i].position);
    ASSERT_EQ(res.cloud.points[i].tag, native.points[i].tag);
  }
  for (std::size_t i = native.size(); i < res.cloud.size(); ++i) {
    ASSERT_EQ(res.cloud.points[i].tag, PointTag::kVirtual);
    ASSERT_EQ(res.cloud.points[i].intensity, kInjectedIntensity);
  }
  EXPECT_EQ(res.report.generator, SeededRng::kIdentity);
}

TEST(Inject, ZeroCountEdgeStillTriggers) {
  InjectionConfig cfg;
  cfg.params.mu = 60.0;  // envelope vanishes while the window stays open
  const auto res = inject(small_native(), {2.4, 30.0, 0.18}, cfg);
  EXPECT_TRUE(res.report.triggered);
  EXPECT_EQ(res.report.n_injected, 0);
  EXPECT_EQ(res.cloud.size(), 50u);
}

TEST(Inject, PropagatesDomainErrors) {
  EXPECT_THROW(inject(small_native(), {3.0, 50.0, 0.36}, InjectionConfig{}), ModelDomainError);
}

TEST(Inject, RejectsNonPositiveSpread) {
  InjectionConfig cfg;
  cfg.spread.z() = 0.0;
  EXPECT_THROW(inject(small_native(), {2.4, 30.0, 0.18}, cfg), ContractViolation);
}

TEST(Inject, DeterministicUnderSeedRepetition) {
  InjectionConfig cfg;
  cfg.seed = 1234;
  const auto a = inject(small_native(), {2.0, 30.0, 0.18}, cfg);
  const auto b = inject(small_native(), {2.0, 30.0, 0.18}, cfg);
  std::ostringstream sa, sb;
  write_point_csv(sa, {a.cloud});
  write_point_csv(sb, {b.cloud});
  write_report_row(sa, a.report);
  write_report_row(sb, b.report);
  EXPECT_EQ(sa.str(), sb.str());
  cfg.seed = 1235;
  const auto c = inject(small_native(), {2.0, 30.0, 0.18}, cfg);
  EXPECT_NE(a.report.r, c.report.r);
}

TEST(Inject, TriggerRateMatchesAppearanceProbability) {
  InjectionConfig cfg;
  const auto w = appearance_window(30.0, 0.18, cfg.params);
  const MirrorState s{w.d_min + 0.03, 30.0, 0.18};  // on the rising edge
  const double p = appearance_probability(s, cfg.params);
  ASSERT_GT(p, 0.2);
  ASSERT_LT(p, 0.8);
  const PointCloud empty;
  const int n = 20000;
  int hits = 0;
  for (int seed = 0; seed < n; ++seed) {
    SeededRng rng(static_cast<std::uint64_t>(seed));
    // The trigger depends only on the first uniform draw.
    hits += rng.uniform() < p ? 1 : 0;
  }
  cfg.seed = 99;
  int via_inject = 0;
  for (int seed = 0; seed < 2000; ++seed) {
    cfg.seed = static_cast<std::uint64_t>(seed);
    via_inject += inject(empty, s, cfg).report.triggered ? 1 : 0;
  }
  const double se = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(static_cast<double>(hits) / n, p, 3 * se);
  EXPECT_NEAR(static_cast<double>(via_inject) / 2000, p, 3 * std::sqrt(p * (1 - p) / 2000));
}

TEST(Inject, ClusterStatisticsMatchConfiguration) {
  InjectionConfig cfg;
  cfg.seed = 7;
  const MirrorState s{2.6, 20.0, 0.6};
  const auto res = inject(PointCloud{}, s, cfg);
  ASSERT_TRUE(res.report.triggered);
  const auto n = static_cast<double>(res.report.n_injected);
  ASSERT_GE(n, 100.0);
  Vec3 mean = Vec3::Zero();
  for (const auto& p : res.cloud.points) mean += p.position;
  mean /= n;
  Vec3 var = Vec3::Zero();
  for (const auto& p : res.cloud.points) var += (p.position - mean).cwiseAbs2();
  var /= (n - 1);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(mean(k), res.report.centroid(k), 4 * cfg.spread(k) / std::sqrt(n));
    EXPECT_NEAR(std::sqrt(var(k)), cfg.spread(k), 0.10 * cfg.spread(k));
  }
  const auto f = predict_features(s, cfg.params);
  EXPECT_NEAR(res.report.centroid.x(), f.X, 1e-12);
  EXPECT_NEAR(std::hypot(res.report.centroid.x(), res.report.centroid.y()), f.R, 1e-12);
}

TEST(Inject, NativePointsNeverModified) {
  const LidarConfig lidar;
  const PointCloud native = scan(Scene{}, SensorPose::at(0, 0, 0, lidar), lidar);
  InjectionConfig cfg;
  const auto res = inject(native, {2.0, 25.0, 0.36}, cfg);
  ASSERT_GE(res.cloud.size(), native.size());
  for (std::size_t i = 0; i < native.size(); ++i) {
    ASSERT_EQ(res.cloud.points[i].position, native.points[i].position);
    ASSERT_EQ(res.cloud.points[i].intensity, native.points[i].intensity);
  }
}

TEST(Report, CsvRow) {
  InjectionReport r;
  r.frame = 2;
  r.triggered = true;
  r.r = 0.25;
  r.n_injected = 10;
  r.centroid = Vec3(1, 2, -1.2);
  std::ostringstream os;
  write_report_row(os, r);
  EXPECT_EQ(os.str(), "2,1,0.25,10,1,2,-1.2\n");
  EXPECT_EQ(kReportHeader, "frame,triggered,r,N,cx,cy,cz");
}
