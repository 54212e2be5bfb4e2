#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>

#include "bagrl/task_mdp.hpp"

using namespace bagrl;

namespace {

Observation areas(double bag, double o, double cube) {
  Observation obs;
  obs.a_bag = bag;
  obs.a_o = o;
  obs.a_cube = cube;
  return obs;
}

Observation with_points(std::size_t np, std::size_t nd) {
  Observation obs;
  for (std::size_t i = 0; i < np; ++i) obs.primary_points.push_back({double(i), 0});
  for (std::size_t i = 0; i < nd; ++i) obs.complementary_points.push_back({0, double(i)});
  return obs;
}

}  // namespace

TEST(ClassifyState, Examples) {
  const auto b1 = presets::bag1();
  EXPECT_EQ(classify_state(areas(0, 0, 0), b1), StateId::S4);
  EXPECT_EQ(classify_state(areas(0, 0, 500), b1), StateId::S5);
  EXPECT_EQ(classify_state(areas(30000, 2000, 0), b1), StateId::S2);
}

TEST(ClassifyState, TruthTable) {
  const auto p = presets::bag1();
  const double bags[] = {0.0, 0.5 * p.a_th, 1.1 * p.a_th};
  const double opens[] = {0.0, 0.5 * p.a_oth, 2.0 * p.a_oth};
  const double cubes[] = {0.0, 400.0};
  // [bag][open][cube]; nullopt means no row of the predicate table matches.
  using S = std::optional<StateId>;
  const S expect[3][3][2] = {
      {{StateId::S4, StateId::S5}, {S{}, S{}}, {S{}, S{}}},
      {{StateId::S0, S{}}, {S{}, S{}}, {S{}, S{}}},
      {{S{}, S{}}, {StateId::S1, S{}}, {StateId::S2, StateId::S3}},
  };
  int raised = 0;
  for (int b = 0; b < 3; ++b) {
    for (int o = 0; o < 3; ++o) {
      for (int c = 0; c < 2; ++c) {
        const auto obs = areas(bags[b], opens[o], cubes[c]);
        if (expect[b][o][c]) {
          EXPECT_EQ(classify_state(obs, p), *expect[b][o][c]) << b << o << c;
        } else {
          ++raised;
          try {
            classify_state(obs, p);
            ADD_FAILURE() << "expected a raise for " << b << o << c;
          } catch (const UnclassifiableObservation& e) {
            EXPECT_EQ(e.code(), ErrorCode::unclassifiable_observation);
            EXPECT_EQ(e.a_bag, bags[b]);
            EXPECT_EQ(e.a_o, opens[o]);
            EXPECT_EQ(e.a_cube, cubes[c]);
          }
        }
      }
    }
  }
  EXPECT_EQ(raised, 12);
}

TEST(ClassifyState, RejectsNegativeAndNonFiniteAreas) {
  EXPECT_THROW(classify_state(areas(-1, 0, 0), presets::bag1()), Error);
  EXPECT_THROW(classify_state(areas(std::nan(""), 0, 0), presets::bag1()), Error);
}

TEST(Reward, Examples) {
  const auto p = presets::bag1();
  EXPECT_EQ(reward(StateId::S4, areas(0, 0, 0), p, false), 1.0);
  EXPECT_EQ(reward(StateId::S5, areas(0, 0, 600), p, false), -0.1);
  EXPECT_EQ(reward(StateId::S1, areas(p.a_b_max, 100, 0), p, false), 1.0);
  EXPECT_DOUBLE_EQ(reward(StateId::S0, areas(17000, 0, 0), p, false), 0.5);
  EXPECT_DOUBLE_EQ(reward(StateId::S2, areas(30000, 1950, 0), p, false), 0.5);
  EXPECT_EQ(reward(StateId::S3, areas(30000, 1950, 600), p, true), 1.0);
  EXPECT_EQ(reward(StateId::S3, areas(30000, 1950, 600), p, false), 0.0);
}

TEST(Reward, BoundedForRandomInputs) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1e5);
  const auto p = presets::bag2();
  for (int k = 0; k < 10000; ++k) {
    for (auto s : kAllStates) {
      const double r = reward(s, areas(u(rng), u(rng), u(rng)), p, k % 2 == 0);
      ASSERT_GE(r, -0.1);
      ASSERT_LE(r, 1.0);
    }
  }
}

TEST(Reward, RejectsBadMaxima) {
  auto p = presets::bag1();
  p.a_o_max = 0.0;
  EXPECT_THROW(reward(StateId::S2, areas(1, 1, 0), p, false), Error);
}

TEST(ObjectAtCenter, RadiusIsFractionOfOpeningDiagonal) {
  Observation obs;
  obs.opening_points = {{0, 0}, {30, 0}, {30, 40}, {0, 40}};  // diagonal 50
  obs.opening_center = Point2{15, 20};
  obs.cube_position = Point2{15 + 5, 20};
  EXPECT_TRUE(object_at_center(obs));  // radius 5
  obs.cube_position = Point2{15 + 5.01, 20};
  EXPECT_FALSE(object_at_center(obs));
  EXPECT_TRUE(object_at_center(obs, 0.2));
  obs.cube_position.reset();
  EXPECT_FALSE(object_at_center(obs));
}

TEST(Affordances, Rules) {
  EXPECT_EQ(affordances(StateId::S0), (AffordanceRule{StateId::S0, PrimitiveKind::grasp, PrimitiveKind::lift}));
  EXPECT_EQ(affordances(StateId::S1), (AffordanceRule{StateId::S1, PrimitiveKind::scratch, PrimitiveKind::drag}));
  EXPECT_EQ(affordances(StateId::S2), (AffordanceRule{StateId::S2, PrimitiveKind::pick, PrimitiveKind::place}));
  EXPECT_EQ(affordances(StateId::S3).complementary, PrimitiveKind::carry);
  for (auto s : {StateId::S4, StateId::S5}) {
    try {
      affordances(s);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::no_affordance);
    }
  }
}

TEST(Affordances, EveryKindInExactlyOneRule) {
  std::map<PrimitiveKind, int> seen;
  for (auto s : kNonTerminalStates) {
    const auto r = affordances(s);
    EXPECT_EQ(role_of(r.primary), ActionRole::primary);
    EXPECT_EQ(role_of(r.complementary), ActionRole::complementary);
    ++seen[r.primary];
    ++seen[r.complementary];
  }
  EXPECT_EQ(seen.size(), kAllPrimitives.size());
  for (auto [k, n] : seen) EXPECT_EQ(n, 1) << to_string(k);
}

TEST(ActionKey, RoundTrip) {
  const ActionPair a{PrimitiveKind::scratch, 3, PrimitiveKind::drag, 7};
  EXPECT_EQ(action_key(a), "scratch@3/drag@7");
  EXPECT_EQ(parse_action_key("scratch@3/drag@7"), a);
  // The carry-stage grasp label maps onto the rule's primary.
  EXPECT_EQ(parse_action_key("grasp@4/carry@4").primary, PrimitiveKind::close);
  EXPECT_THROW(parse_action_key("lift@1/grasp@1"), Error);
  EXPECT_THROW(parse_action_key("grasp@x/lift@1"), Error);
  EXPECT_THROW(parse_action_key("grasp@1"), Error);
}

TEST(BuildActionSpace, Sizes) {
  EXPECT_EQ(build_action_space(StateId::S3, with_points(81, 81), PairingMode::indexed).size(), 81u);
  EXPECT_EQ(build_action_space(StateId::S1, with_points(9, 9), PairingMode::cartesian).size(), 81u);
  EXPECT_EQ(build_action_space(StateId::S2, with_points(1, 9)).size(), 9u);
  EXPECT_EQ(build_action_space(StateId::S0, with_points(9, 9)).size(), 9u);
  try {
    build_action_space(StateId::S0, with_points(9, 8), PairingMode::indexed);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_config);
  }
  EXPECT_THROW(build_action_space(StateId::S4, with_points(1, 1)), Error);
}

TEST(BuildActionSpace, PairsMatchRuleAndStayInRange) {
  for (auto s : kNonTerminalStates) {
    for (auto mode : {PairingMode::cartesian, PairingMode::indexed}) {
      const std::size_t np = 6, nd = mode == PairingMode::indexed ? 6 : 4;
      const auto space = build_action_space(s, with_points(np, nd), mode);
      EXPECT_EQ(space.size(), mode == PairingMode::indexed ? np : np * nd);
      const auto rule = affordances(s);
      std::set<ActionPair> unique(space.begin(), space.end());
      EXPECT_EQ(unique.size(), space.size());
      EXPECT_TRUE(std::is_sorted(space.begin(), space.end()));
      for (const auto& a : space) {
        EXPECT_EQ(a.primary, rule.primary);
        EXPECT_EQ(a.complementary, rule.complementary);
        EXPECT_LT(a.primary_pose, np);
        EXPECT_LT(a.complementary_pose, nd);
      }
    }
  }
}

TEST(FullUnfilteredCount, Examples) {
  EXPECT_EQ(full_unfiltered_count(8, 81, 4), 2592u);
  EXPECT_EQ(full_unfiltered_count(1, 1, 1), 1u);
  EXPECT_EQ(full_unfiltered_count(8, 9, 4), 288u);
  EXPECT_THROW(full_unfiltered_count(0, 9, 4), Error);
}

TEST(BagParams, PresetsAndValidation) {
  const auto b2 = presets::by_name("bag2");
  EXPECT_EQ(b2.a_th, 18000.0);
  EXPECT_EQ(b2.a_oth, 50.0);
  EXPECT_EQ(b2.a_b_max, 28000.0);
  EXPECT_EQ(b2.a_o_max, 3200.0);
  const auto b1 = presets::bag1();
  EXPECT_EQ(b1.a_th, 25000.0);
  EXPECT_EQ(b1.a_oth, 150.0);
  EXPECT_EQ(b1.a_b_max, 34000.0);
  EXPECT_EQ(b1.a_o_max, 3900.0);
  for (const auto& p : presets::all()) EXPECT_NO_THROW(p.validate());
  auto bad = b1;
  bad.a_oth = bad.a_o_max;
  EXPECT_THROW(bad.validate(), Error);
  EXPECT_THROW(presets::by_name("bag9"), Error);
}

TEST(StateNames, RoundTrip) {
  for (auto s : kAllStates) EXPECT_EQ(parse_state(to_string(s)), s);
  for (auto s : kAllStages) EXPECT_EQ(parse_stage(to_string(s)), s);
  EXPECT_TRUE(is_terminal(StateId::S4));
  EXPECT_TRUE(is_terminal(StateId::S5));
  EXPECT_FALSE(is_terminal(StateId::S3));
}
