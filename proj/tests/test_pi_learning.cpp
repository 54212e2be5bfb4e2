#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "bagrl/pi_learning.hpp"
#include "support/reference.hpp"

using namespace bagrl;

namespace {

ActionPair act(std::size_t i) { return {PrimitiveKind::grasp, i, PrimitiveKind::lift, i}; }

std::vector<ActionPair> acts(std::size_t n) {
  std::vector<ActionPair> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(act(i));
  return out;
}

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

// Throws a simulator-style error on the given step.
class FailingEnv : public ref::FixedRewardEnv {
 public:
  FailingEnv() : ref::FixedRewardEnv({0.1, 0.2}) {}
  StepResult step(const ActionPair& a) {
    if (steps == 3) throw Error(ErrorCode::contract_violation, "boom");
    return ref::FixedRewardEnv::step(a);
  }
};

}  // namespace

TEST(PiUpdate, LiteralExamples) {
  PiTable t(UpdateMode::literal);
  const auto a = act(0);
  EXPECT_EQ(t.entry(StateId::S0, a), (PiEntry{0.0, 0}));
  EXPECT_EQ(pi_update(t, StateId::S0, a, 1.0), 1.0);
  EXPECT_EQ(t.visits(StateId::S0, a), 1u);
  EXPECT_EQ(pi_update(t, StateId::S0, a, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(pi_update(t, StateId::S0, a, 1.0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(pi_update(t, StateId::S0, a, 1.0), 5.0 / 12.0);
  EXPECT_EQ(t.visits(StateId::S0, a), 4u);
}

TEST(PiUpdate, IncrementalMeanExamples) {
  PiTable t(UpdateMode::incremental_mean);
  const auto a = act(0);
  EXPECT_EQ(pi_update(t, StateId::S1, a, 1.0), 1.0);
  EXPECT_EQ(pi_update(t, StateId::S1, a, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(pi_update(t, StateId::S1, a, 0.5), 0.5);
}

TEST(PiUpdate, MatchesIndependentOracles) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> r(-0.1, 1.0);
  std::uniform_int_distribution<int> len(1, 60);
  for (int k = 0; k < 2000; ++k) {
    PiTable lit(UpdateMode::literal), mean(UpdateMode::incremental_mean);
    const auto a = act(static_cast<std::size_t>(k % 5));
    double fold = 0.0, sum = 0.0;
    const int n = len(rng);
    for (int m = 1; m <= n; ++m) {
      const double x = r(rng);
      fold = (fold + x) / m;
      sum += x;
      lit.update(StateId::S2, a, x);
      mean.update(StateId::S2, a, x);
    }
    ASSERT_TRUE(rel_close(lit.value(StateId::S2, a), fold, 1e-12));
    ASSERT_TRUE(rel_close(mean.value(StateId::S2, a), sum / n, 1e-12));
    ASSERT_EQ(lit.visits(StateId::S2, a), static_cast<std::uint64_t>(n));
  }
}

TEST(QUpdate, Examples) {
  QTable q;
  EXPECT_DOUBLE_EQ(q_update(q, StateId::S3, act(0), 1.0, StateId::S4, {}, 0.1, 0.9), 0.1);

  QTable q2;
  q2.set(StateId::S0, act(0), 0.5);
  q2.set(StateId::S1, act(1), 0.5);
  q2.set(StateId::S1, act(2), 0.2);
  const auto next = acts(3);
  EXPECT_DOUBLE_EQ(q_update(q2, StateId::S0, act(0), 0.0, StateId::S1, next, 0.1, 0.9), 0.495);

  QTable q3;
  q3.set(StateId::S0, act(0), 0.7);
  EXPECT_EQ(q_update(q3, StateId::S0, act(0), 0.25, StateId::S1, next, 1.0, 0.0), 0.25);
  EXPECT_EQ(q.value(StateId::S2, act(9)), 0.0);
}

TEST(SelectAction, PureExplorationIsUniform) {
  const std::size_t k = 10;
  const auto actions = acts(k);
  PiTable t;
  t.update(StateId::S0, act(3), 1.0);  // greedy would always pick 3
  TrainConfig cfg;
  cfg.epsilon = 1.0;
  ActionSelector sel(7);
  std::vector<int> counts(k, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[sel.select_index(t, StateId::S0, actions, cfg)];
  double chi2 = 0.0;
  const double expect = double(draws) / double(k);
  for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
  EXPECT_LT(chi2, 21.666);  // df = 9, p = 0.01
}

TEST(SelectAction, GreedyTieGoesToLowestIndex) {
  PiTable t(UpdateMode::incremental_mean);
  t.update(StateId::S0, act(0), 0.2);
  t.update(StateId::S0, act(1), 0.9);
  t.update(StateId::S0, act(2), 0.9);
  TrainConfig cfg;
  cfg.epsilon = 0.0;
  ActionSelector sel(1);
  const auto actions = acts(3);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sel.select_index(t, StateId::S0, actions, cfg), 1u);
  EXPECT_EQ(select_action(t, StateId::S0, std::span<const ActionPair>(actions), cfg, sel), act(1));
}

TEST(SelectAction, RoundRobinCycles) {
  PiTable t;
  TrainConfig cfg;
  cfg.exploration = Exploration::round_robin;
  ActionSelector sel(0);
  const auto actions = acts(3);
  std::vector<std::size_t> got;
  for (int i = 0; i < 6; ++i) got.push_back(sel.select_index(t, StateId::S1, actions, cfg));
  EXPECT_EQ(got, (std::vector<std::size_t>{0, 1, 2, 0, 1, 2}));
}

TEST(SelectAction, EmptyActionsRaise) {
  PiTable t;
  TrainConfig cfg;
  ActionSelector sel(0);
  try {
    sel.select_index(t, StateId::S0, std::span<const ActionPair>{}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::no_affordance);
  }
}

TEST(ExtractPolicy, Argmax) {
  PiTable t(UpdateMode::incremental_mean);
  t.update(StateId::S0, act(0), 0.3);
  t.update(StateId::S0, act(1), 0.7);
  t.update(StateId::S2, act(4), 0.5);
  t.update(StateId::S2, act(2), 0.5);
  const auto p = extract_policy(t);
  EXPECT_EQ(p.at(StateId::S0), act(1));
  EXPECT_EQ(p.at(StateId::S2), act(2));
  EXPECT_EQ(p.count(StateId::S1), 0u);
  EXPECT_TRUE(extract_policy(PiTable{}).empty());
  EXPECT_TRUE(extract_policy(QTable{}).empty());
}

TEST(ExtractPolicy, AllNegativeValuesStillPickMax) {
  PiTable t(UpdateMode::incremental_mean);
  t.update(StateId::S3, act(0), -0.1);
  t.update(StateId::S3, act(1), -0.05);
  EXPECT_EQ(extract_policy(t).at(StateId::S3), act(1));
}

TEST(ExtractPolicy, InvariantUnderRewardScaling) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> r(0.0, 0.99);
  for (auto mode : {UpdateMode::literal, UpdateMode::incremental_mean}) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> rewards(12);
      for (auto& x : rewards) x = r(rng);
      Policy base;
      for (double c : {1.0, 0.5, 2.0, 10.0}) {
        ref::FixedRewardEnv env(rewards);
        TrainConfig cfg;
        cfg.n = 200;
        cfg.update_mode = mode;
        cfg.seed = static_cast<std::uint64_t>(trial);
        cfg.reward_scale = c;
        const auto p = extract_policy(train(env, cfg).table);
        if (c == 1.0) {
          base = p;
        } else {
          EXPECT_EQ(p, base) << "c=" << c;
        }
      }
    }
  }
}

TEST(Train, RejectsZeroSteps) {
  ref::FixedRewardEnv env({0.5});
  TrainConfig cfg;
  cfg.n = 0;
  try {
    train(env, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_config);
  }
}

TEST(Train, OneRoundRobinSweepRecordsEachReward) {
  const std::vector<double> rewards = {0.25, 0.5, 0.125, 0.75, 0.375};
  for (auto mode : {UpdateMode::literal, UpdateMode::incremental_mean}) {
    ref::FixedRewardEnv env(rewards);
    TrainConfig cfg;
    cfg.n = static_cast<std::int64_t>(rewards.size());
    cfg.update_mode = mode;
    cfg.exploration = Exploration::round_robin;
    const auto [table, log] = train(env, cfg);
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      EXPECT_EQ(table.entry(StateId::S0, act(i)), (PiEntry{rewards[i], 1}));
    }
    EXPECT_EQ(extract_policy(table).at(StateId::S0), act(3));
    ASSERT_EQ(log.size(), rewards.size());
    EXPECT_EQ(log.back().cum_reward, 0.25 + 0.5 + 0.125 + 0.75 + 0.375);
    EXPECT_EQ(log[2].step, 2);
    EXPECT_EQ(log[2].action, act(2));
  }
}

TEST(Train, SameSeedSameLog) {
  std::vector<double> rewards = {0.1, 0.4, 0.3, 0.2, 0.6, 0.5};
  TrainConfig cfg;
  cfg.n = 300;
  cfg.seed = 77;
  ref::FixedRewardEnv e1(rewards), e2(rewards);
  const auto a = train(e1, cfg);
  const auto b = train(e2, cfg);
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.table, b.table);
  cfg.seed = 78;
  ref::FixedRewardEnv e3(rewards);
  EXPECT_NE(train(e3, cfg).log, a.log);
}

TEST(Train, StepErrorsCarryStepIndex) {
  FailingEnv env;
  TrainConfig cfg;
  cfg.n = 10;
  try {
    PiTable t;
    train_into(env, cfg, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::contract_violation);
    EXPECT_NE(std::string(e.what()).find("step 3"), std::string::npos) << e.what();
  }
}

TEST(TrainQ, UnitAlphaZeroGammaGivesRewardTable) {
  const std::vector<double> rewards = {0.3, 0.1, 0.9, 0.45};
  ref::FixedRewardEnv env(rewards);
  TrainConfig cfg;
  cfg.n = 4;
  cfg.alpha = 1.0;
  cfg.gamma = 0.0;
  cfg.exploration = Exploration::round_robin;
  const auto [table, log] = train_q(env, cfg);
  for (std::size_t i = 0; i < rewards.size(); ++i) EXPECT_EQ(table.value(StateId::S0, act(i)), rewards[i]);
  EXPECT_EQ(extract_policy(table).at(StateId::S0), act(2));

  ref::FixedRewardEnv e1(rewards), e2(rewards);
  cfg.exploration = Exploration::epsilon_greedy;
  cfg.n = 100;
  cfg.alpha = 0.1;
  cfg.gamma = 0.9;
  EXPECT_EQ(train_q(e1, cfg).log, train_q(e2, cfg).log);
}

TEST(TableIo, PiRoundTrip) {
  PiTable t(UpdateMode::incremental_mean);
  t.update(StateId::S0, act(1), 0.1);
  t.update(StateId::S0, act(1), 0.2);
  t.update(StateId::S3, {PrimitiveKind::close, 4, PrimitiveKind::carry, 4}, -0.1);
  t.update(StateId::S1, {PrimitiveKind::scratch, 2, PrimitiveKind::drag, 8}, 1.0 / 3.0);
  std::stringstream ss;
  write_table(ss, t);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "state,action_key,value,visits");
  const auto loaded = read_table(ss, UpdateMode::incremental_mean);
  ASSERT_TRUE(loaded.pi);
  EXPECT_EQ(*loaded.pi, t);
  EXPECT_EQ(loaded.policy(), extract_policy(t));
}

TEST(TableIo, QRoundTripAndErrors) {
  QTable q;
  q.set(StateId::S2, {PrimitiveKind::pick, 0, PrimitiveKind::place, 5}, 0.123456789012345);
  std::stringstream ss;
  write_table(ss, q);
  const auto loaded = read_table(ss);
  ASSERT_TRUE(loaded.q);
  EXPECT_EQ(*loaded.q, q);

  std::stringstream bad("state,action,value\nS0,grasp@0/lift@0,1\n");
  EXPECT_THROW(read_table(bad), Error);
  std::stringstream short_row("state,action_key,value,visits\nS0,grasp@0/lift@0,1\n");
  EXPECT_THROW(read_table(short_row), Error);
}

TEST(LogIo, HeaderAndConstantColumns) {
  ref::FixedRewardEnv env({0.5, 0.25});
  TrainConfig cfg;
  cfg.n = 5;
  std::stringstream ss;
  write_log(ss, train(env, cfg).log);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "step,state,action,reward,cum_reward");
  int rows = 0;
  while (std::getline(ss, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
  }
  EXPECT_EQ(rows, 5);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.epsilon = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.alpha = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_EQ(parse_update_mode("literal-eq5"), UpdateMode::literal);
  EXPECT_EQ(parse_update_mode("incremental-mean"), UpdateMode::incremental_mean);
  EXPECT_EQ(parse_exploration("round-robin"), Exploration::round_robin);
  EXPECT_THROW(parse_update_mode("median"), Error);
}
