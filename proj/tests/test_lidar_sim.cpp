#include <gtest/gtest.h>

#include <array>
#include <sstream>

#include "mirrorspoof/lidar_sim.hpp"
#include "mirrorspoof/point_cloud.hpp"
#include "mirrorspoof/scenes.hpp"

using namespace mirrorspoof;

namespace {

// Mirror image of p across the plane through c with unit normal n.
Vec3 plane_image(const Vec3& p, const Vec3& c, const Vec3& n) { return p - 2.0 * (p - c).dot(n) * n; }

const SurfaceRef kCone{SurfaceKind::kDiffuse, 0};

}  // namespace

TEST(ReceivedPower, CalibrationAnchor) { EXPECT_DOUBLE_EQ(received_power(10.0, 1.0, 1.0), 1.0); }

TEST(ReceivedPower, InverseFourthPower) {
  EXPECT_NEAR(received_power(20.0, 1.0, 1.0), 1.0 / 16.0, 1e-15);
  const double near = received_power(4.0, 0.01, 0.5), far = received_power(8.0, 0.01, 0.5);
  EXPECT_NEAR(near / far, 16.0, 1e-6);
}

TEST(ReceivedPower, ClampsAndRejectsBadLengths) {
  EXPECT_DOUBLE_EQ(received_power(1.0, 1.0, 1.0), 1.0);
  EXPECT_THROW(received_power(0.0, 1.0, 1.0), ContractViolation);
}

TEST(LidarConfig, DefaultsAreValid) {
  LidarConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.columns(), 1024);
  EXPECT_DOUBLE_EQ(c.elevation_deg(0), -22.5);
  EXPECT_DOUBLE_EQ(c.elevation_deg(127), 22.5);
}

TEST(LidarConfig, RejectsInvalidValues) {
  LidarConfig c;
  c.azimuth_step_deg = 0.35;  // does not divide 360
  EXPECT_THROW(c.validate(), ContractViolation);
  c = {};
  c.channels = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = {};
  c.fov_min_deg = 10;
  c.fov_max_deg = -10;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = {};
  c.max_range = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(Scan, EmptySceneYieldsGroundOnly) {
  const LidarConfig cfg;
  const PointCloud pc = scan(Scene{}, SensorPose::at(0, 0, 0, cfg), cfg);
  ASSERT_GT(pc.size(), 0u);
  EXPECT_EQ(count_tag(pc, PointTag::kGround), pc.size());
  for (const auto& p : pc.points) {
    ASSERT_NEAR(p.position.z(), -cfg.mount_height, 1e-9);
    ASSERT_LE(p.position.norm(), cfg.max_range);
    ASSERT_GE(p.intensity, cfg.detection_threshold);
  }
}

TEST(Scan, BaselineConeProducesCompactCluster) {
  const LidarConfig cfg;
  const OraSetup setup;
  const PointCloud pc = scan(ora_baseline_scene(setup), SensorPose::at(0, 0, 0, cfg), cfg);
  const std::size_t n = count_from_surface(pc, PointTag::kDirect, kCone);
  EXPECT_GE(n, 50u);
  for (const auto& p : pc.points) {
    if (p.tag != PointTag::kDirect) continue;
    const double horizontal = std::hypot(p.position.x(), p.position.y());
    ASSERT_NEAR(horizontal, setup.cone_range(), kConeBaseRadius + 1e-6);
  }
}

TEST(Scan, OccludingPanelRemovesTheCone) {
  const LidarConfig cfg;
  const auto pc = scan(ora_scene(OraSetup{}, 0.0), SensorPose::at(0, 0, 0, cfg), cfg);
  EXPECT_EQ(count_from_surface(pc, PointTag::kDirect, kCone), 0u);
}

TEST(OraSweep, AllTiltsHideTheCone) {
  const std::array<double, 4> tilts{0.0, 15.0, 30.0, 45.0};
  const auto counts = ora_sweep(tilts);
  for (auto c : counts) EXPECT_EQ(c, 0u);
}

TEST(OraSweep, PartialOcclusionLeavesConePoints) {
  OraSetup s;
  // Half the cone's angular width at the panel's range.
  s.panel_width = 0.5 * kConeBaseRadius * s.panel_distance / s.cone_range();
  const std::array<double, 1> tilt{0.0};
  EXPECT_GT(ora_sweep(tilt, s).front(), 0u);
}

TEST(Scan, VirtualPointsAreMirrorImagesBeyondThePanel) {
  const LidarConfig cfg;
  const OaaSetup s;
  const Scene scene = oaa_scene(s);
  const SensorPose pose = SensorPose::at(0, 0, 0, cfg);
  const PointCloud pc = scan(scene, pose, cfg);
  const MirrorPanel& m = scene.mirrors.front();
  std::size_t virtuals = 0;
  for (const auto& p : pc.points) {
    if (p.tag != PointTag::kVirtual) continue;
    ++virtuals;
    const Vec3 w = pose.to_world(p.position);
    // Behind the panel plane as seen from the sensor.
    ASSERT_LT((w - m.center).dot(m.normal), 0.0);
    // Reflect back: the true surface point must lie on the wall.
    const Vec3 real = plane_image(w, m.center, m.normal);
    ASSERT_GE((real - m.center).dot(m.normal), -1e-9);
    const double range = p.position.norm();
    const double to_panel = (m.center - pose.position).norm();
    ASSERT_GT(range, to_panel - 1.0);
  }
  EXPECT_GT(virtuals, 100u);
}

TEST(Scan, NoMirrorsMeansNoVirtualPoints) {
  const LidarConfig cfg;
  const auto pc = scan(oaa_scene(OaaSetup{}, false), SensorPose::at(0, 0, 0, cfg), cfg);
  EXPECT_EQ(count_tag(pc, PointTag::kVirtual), 0u);
}

TEST(Scan, MirrorFacingTheSkyOmitsReturns) {
  LidarConfig cfg;
  Scene scene;
  scene.has_ground = false;
  // Beams are bounced upward and leave the scene.
  scene.mirrors.push_back(MirrorPanel::oriented(Vec3(0, 3, 2.2), Vec3(0, -1, 1).normalized(), 2.0, 2.0));
  const auto pc = scan(scene, SensorPose::at(0, 0, 0, cfg), cfg);
  EXPECT_EQ(pc.size(), 0u);
}

TEST(Scan, VirtualCountGrowsWithPanelArea) {
  const LidarConfig cfg;
  std::size_t previous = 0;
  for (double area : {0.18, 0.36, 0.60}) {
    const auto pc = scan(oaa_scene(OaaSetup::with_area(area)), SensorPose::at(0, 0, 0, cfg), cfg);
    const std::size_t n = count_tag(pc, PointTag::kVirtual);
    EXPECT_GT(n, previous) << "area " << area;
    previous = n;
  }
}

TEST(Scan, CanonicalOrderAndDeterminism) {
  LidarConfig cfg;
  cfg.channels = 16;
  cfg.azimuth_step_deg = 1.0;
  const Scene scene = oaa_scene(OaaSetup{});
  const auto a = scan(scene, SensorPose::at(0, 0, 0, cfg), cfg);
  const auto b = scan(scene, SensorPose::at(0, 0, 0, cfg), cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.points[i].position, b.points[i].position);
  // Channel-major: elevation never decreases along the output.
  double last = -1e9;
  for (const auto& p : a.points) {
    const double el = std::atan2(p.position.z(), std::hypot(p.position.x(), p.position.y()));
    if (p.tag == PointTag::kGround) {
      ASSERT_GE(el, last - 1e-9);
      last = el;
    }
  }
}

TEST(Scan, PoseYawRotatesTheView) {
  LidarConfig cfg;
  cfg.channels = 32;
  const Scene scene = ora_baseline_scene();
  // Turning the sensor 90 deg left puts the cone on its right.
  const auto pc = scan(scene, SensorPose::at(0, 0, kPi / 2, cfg), cfg);
  std::size_t n = 0;
  for (const auto& p : pc.points) {
    if (p.tag == PointTag::kDirect) {
      ++n;
      ASSERT_GT(p.position.x(), 5.0);
    }
  }
  EXPECT_GT(n, 0u);
}

TEST(PointCsv, RoundTripsAtNineDigits) {
  PointCloud pc;
  pc.frame = 3;
  pc.timestamp = 0.3;
  pc.points.push_back({Vec3(1.23456789, -2.5, 0.125), 0.75, PointTag::kVirtual, {}});
  pc.points.push_back({Vec3(1e-3, 12345.6789, -2.2), 2e-4, PointTag::kGround, {}});
  std::stringstream ss;
  write_point_csv(ss, {pc});
  const std::string first = ss.str();
  const auto back = read_point_csv(ss);
  ASSERT_EQ(back.size(), 1u);
  ASSERT_EQ(back[0].size(), 2u);
  EXPECT_EQ(back[0].frame, 3);
  EXPECT_EQ(back[0].points[0].tag, PointTag::kVirtual);
  std::stringstream again;
  write_point_csv(again, back);
  EXPECT_EQ(first, again.str());
}

TEST(PointCsv, MalformedLineReportsItsNumber) {
  std::stringstream ss("frame,t,x,y,z,intensity,tag\n0,0,1,2,3,0.5,direct\n0,0,1,2,oops,0.5,direct\n");
  try {
    read_point_csv(ss, "cloud.csv");
    FAIL() << "expected an input error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("cloud.csv:3"), std::string::npos) << e.what();
  }
}
