#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "mirrorspoof/scenario.hpp"

using namespace mirrorspoof;

namespace {

const ScenarioLog& default_attack_log() {
  static const ScenarioLog log = run_scenario(ScenarioConfig{});
  return log;
}

}  // namespace

TEST(Ttc, Examples) {
  EXPECT_DOUBLE_EQ(ttc(10.0, 5.0, 10.0), 2.0);
  EXPECT_TRUE(std::isinf(ttc(10.0, 10.0, 5.0)));
  EXPECT_TRUE(std::isinf(ttc(10.0, 7.0, 7.0)));
  EXPECT_DOUBLE_EQ(ttc(0.0, 3.0, 9.0), 0.0);
}

TEST(VehicleState, ClampsAtStandstill) {
  VehicleState v{0.0, 4.0, -8.0};
  v.advance(1.0);
  EXPECT_EQ(v.speed, 0.0);
  EXPECT_NEAR(v.position, 1.0, 1e-12);  // 4^2 / (2 * 8)
  v.advance(1.0);
  EXPECT_NEAR(v.position, 1.0, 1e-12);
}

TEST(Scenario, NullScenarioHasNoEvents) {
  ScenarioConfig c;
  c.attack = false;
  c.max_time = 10.0;
  const auto log = run_scenario(c);
  EXPECT_TRUE(log.event_sequence().empty());
  EXPECT_FALSE(log.collided());
  EXPECT_FALSE(log.ego_brake_time);
  for (const auto& r : log.rows) ASSERT_TRUE(std::isinf(r.ttc));
  EXPECT_NEAR(log.rows.back().t, 10.0, 1e-9);
}

TEST(Scenario, DefaultAttackProducesOrderedEventChain) {
  const auto& log = default_attack_log();
  const std::vector<std::string> expected{"attack-trigger", "ego-brake", "follower-brake", "collision"};
  EXPECT_EQ(log.event_sequence(), expected);
  ASSERT_TRUE(log.attack_time && log.ego_brake_time && log.follower_brake_time && log.collision_time);
  EXPECT_LE(*log.attack_time, *log.ego_brake_time);
  EXPECT_LT(*log.ego_brake_time, *log.follower_brake_time);
  EXPECT_LT(*log.follower_brake_time, *log.collision_time);
  EXPECT_LE(log.min_gap, 0.0);
}

TEST(Scenario, EgoStopsWithinOneTickOfKinematicOracle) {
  const auto& log = default_attack_log();
  const ScenarioConfig c;
  ASSERT_TRUE(log.ego_stop_time && log.ego_brake_time);
  const double expected = kmh_to_ms(25.0) / 8.0;
  EXPECT_NEAR(expected, 0.868, 1e-3);
  EXPECT_NEAR(*log.ego_stop_time - *log.ego_brake_time, expected, c.tick);
}

TEST(Scenario, TtcDropsBelowThreeSecondsBeforeCollision) {
  const auto& log = default_attack_log();
  double min_before = kInfiniteTtc;
  for (const auto& r : log.rows)
    if (r.t < *log.collision_time) min_before = std::min(min_before, r.ttc);
  EXPECT_LT(min_before, 3.0);
  EXPECT_GT(min_before, 0.0);
}

TEST(Scenario, SpeedsNonNegativeAndGapContinuous) {
  const auto& log = default_attack_log();
  const ScenarioConfig c;
  const double v_max = kmh_to_ms(std::max(c.ego_speed_kmh, c.follower_speed_kmh));
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    ASSERT_GE(log.rows[i].v_ego, 0.0);
    ASSERT_GE(log.rows[i].v_follower, 0.0);
    if (i > 0) {
      ASSERT_LE(std::abs(log.rows[i].gap - log.rows[i - 1].gap), v_max * c.tick + 1e-12);
    }
  }
}

TEST(Scenario, CollisionLatchedExactlyWhenGapReachesZero) {
  const auto& log = default_attack_log();
  for (const auto& r : log.rows) {
    if (r.t < *log.collision_time) {
      ASSERT_GT(r.gap, 0.0);
    } else {
      ASSERT_LE(r.gap, 0.0);
    }
  }
  // Ends once both vehicles stand still, and never later than two seconds after impact.
  EXPECT_LE(log.rows.back().t, *log.collision_time + 2.0 + 1e-9);
  EXPECT_EQ(log.rows.back().v_ego, 0.0);
  EXPECT_EQ(log.rows.back().v_follower, 0.0);
}

TEST(Scenario, AlertFollowerAvoidsCollision) {
  ScenarioConfig c;
  c.follower_delay = 0.0;
  c.follower_decel = 8.0;
  const auto log = run_scenario(c);
  EXPECT_TRUE(log.ego_brake_time);
  EXPECT_FALSE(log.collided());
  EXPECT_FALSE(stopping_distance_collides(kmh_to_ms(25.0), 8.0, 8.0, 8.0, 0.0));
}

TEST(Scenario, DefaultsCollideByStoppingDistance) {
  EXPECT_TRUE(stopping_distance_collides(kmh_to_ms(25.0), 8.0, 8.0, 6.0, 1.2));
}

TEST(Scenario, MatchesStoppingDistanceOracleOverSweep) {
  std::mt19937_64 g(2024);
  std::uniform_real_distribution<double> speed(3.0, 20.0), gap(1.0, 25.0), ae(2.5, 9.0), delay(0.0, 2.0),
      frac(0.2, 1.0);
  int collisions = 0;
  for (int i = 0; i < 100; ++i) {
    ScenarioConfig c;
    c.attack = false;
    c.forced_brake_time = 0.0;
    const double v = speed(g);
    c.ego_speed_kmh = c.follower_speed_kmh = v * 3.6;
    c.initial_gap = gap(g);
    c.ego_decel = ae(g);
    c.follower_decel = c.ego_decel * frac(g);
    c.follower_delay = delay(g);
    const bool oracle =
        stopping_distance_collides(kmh_to_ms(c.ego_speed_kmh), c.initial_gap, c.ego_decel, c.follower_decel,
                                   c.follower_delay);
    const auto log = run_scenario(c);
    ASSERT_EQ(log.collided(), oracle) << "case " << i << " v=" << v << " gap=" << c.initial_gap
                                      << " ae=" << c.ego_decel << " af=" << c.follower_decel
                                      << " delay=" << c.follower_delay;
    collisions += oracle ? 1 : 0;
  }
  // The sweep exercises both outcomes.
  EXPECT_GT(collisions, 10);
  EXPECT_LT(collisions, 90);
}

TEST(Scenario, DeterministicUnderSeed) {
  std::ostringstream a, b;
  write_scenario_csv(a, run_scenario(ScenarioConfig{}));
  write_scenario_csv(b, default_attack_log());
  EXPECT_EQ(a.str(), b.str());
}

TEST(Scenario, CsvLayout) {
  const auto& log = default_attack_log();
  std::ostringstream os;
  write_scenario_csv(os, log);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), kScenarioHeader);
  EXPECT_NE(text.find(",inf,"), std::string::npos);
  EXPECT_NE(text.find("attack-trigger"), std::string::npos);
}

TEST(Scenario, ReferenceConfigurationsCollideWhenTriggered) {
  const std::vector<MirrorState> rows{{4.0, 30.0, 0.18}, {5.0, 45.0, 0.36}, {7.0, 60.0, 0.60}};
  for (const auto& s : rows) {
    const auto r = evaluate_configuration(s, ScenarioConfig{});
    EXPECT_EQ(r.raytraced, s.theta >= kMaxOffsetTiltDeg);
    EXPECT_TRUE(r.triggered) << s.d;
    if (r.triggered) {
      EXPECT_TRUE(r.emergency_brake);
      EXPECT_TRUE(r.collision);
      EXPECT_GT(r.max_injected, 0);
    }
  }
}

TEST(ScenarioConfig, KeyValueParsing) {
  const auto c = scenario_from_kv(KeyValueFile::parse_string("tick=0.1\nattack=false\nseed=7\n", "s.cfg"));
  EXPECT_DOUBLE_EQ(c.tick, 0.1);
  EXPECT_FALSE(c.attack);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_THROW(scenario_from_kv(KeyValueFile::parse_string("bogus=1\n", "s.cfg")), InputError);
  try {
    scenario_from_kv(KeyValueFile::parse_string("tick=0\n", "s.cfg"));
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("tick"), std::string::npos);
  }
}
