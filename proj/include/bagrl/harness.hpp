#pragma once

// Experiment protocol: per-stage training budgets, attempt-based evaluation,
// per-run output files and multi-variant sweeps.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bagrl/bag_sim.hpp"
#include "bagrl/config.hpp"
#include "bagrl/environment.hpp"
#include "bagrl/error.hpp"
#include "bagrl/io.hpp"
#include "bagrl/pi_learning.hpp"
#include "bagrl/task_mdp.hpp"

namespace bagrl {

/// splitmix64 over (seed, stream): independent RNG streams from one run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + stream + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace streams {
inline constexpr std::uint64_t train_env = 1;
inline constexpr std::uint64_t eval_env = 2;
inline constexpr std::uint64_t agent = 16;  // + stage index
}  // namespace streams

// ---------------------------------------------------------------------------
// Evaluation

struct AttemptSummary {
  StageId start = StageId::open;
  std::int64_t attempts = 0;
  std::int64_t successes = 0;

  double rate() const { return attempts == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(attempts); }
};

namespace detail {

enum class Goal { task, stage };

template <Environment Env>
bool run_attempt(const Policy& policy, Env& env, StageId start, std::int64_t max_steps, Goal goal) {
  env.reset(start);
  const StateId start_state = state_of(start);
  for (std::int64_t step = 0; step < max_steps; ++step) {
    const StateId s = env.state();
    if (is_terminal(s)) break;
    if (goal == Goal::stage && s != start_state) break;
    auto it = policy.find(s);
    if (it == policy.end()) {
      throw Error(ErrorCode::incomplete_policy, "policy has no action for state " + std::string(to_string(s)));
    }
    env.step(it->second);
  }
  const StateId end = env.state();
  if (goal == Goal::task) return end == StateId::S4;
  // A stage counts as done once the state moved past it (S5 is a failure).
  return end != StateId::S5 && index_of(end) > index_of(start_state);
}

}  // namespace detail

/// Greedy rollouts of `policy` from `start`, repeating an action while the
/// state does not change. Success is reaching S4 within `max_steps_per_attempt`.
template <Environment Env>
AttemptSummary evaluate(const Policy& policy, Env& env, StageId start, std::int64_t attempts,
                        std::int64_t max_steps_per_attempt) {
  if (attempts < 1 || max_steps_per_attempt < 1) {
    throw Error(ErrorCode::invalid_config, "attempts and max steps must be >= 1");
  }
  AttemptSummary out{start, attempts, 0};
  for (std::int64_t i = 0; i < attempts; ++i) {
    if (detail::run_attempt(policy, env, start, max_steps_per_attempt, detail::Goal::task)) ++out.successes;
  }
  return out;
}

/// Like `evaluate`, but an attempt succeeds as soon as the state leaves the
/// stage forwards.
template <Environment Env>
AttemptSummary evaluate_stage(const Policy& policy, Env& env, StageId stage, std::int64_t attempts,
                              std::int64_t max_steps_per_attempt) {
  AttemptSummary out{stage, attempts, 0};
  for (std::int64_t i = 0; i < attempts; ++i) {
    if (detail::run_attempt(policy, env, stage, max_steps_per_attempt, detail::Goal::stage)) ++out.successes;
  }
  return out;
}

/// One row of the results table: per-stage and end-to-end success counts,
/// per-stage training reward, wall-clock training time.
struct EvalReport {
  std::int64_t attempts = 0;
  std::array<std::int64_t, 4> stage_successes{};
  std::int64_t successes_from_unfold = 0;
  std::int64_t successes_from_open = 0;
  std::array<double, 4> stage_reward{};
  double train_seconds = 0.0;

  double total_reward() const { return stage_reward[0] + stage_reward[1] + stage_reward[2] + stage_reward[3]; }
  double rate(std::int64_t successes) const {
    return static_cast<double>(successes) / static_cast<double>(attempts);
  }
};

template <Environment Env>
EvalReport evaluate_report(const Policy& policy, Env& env, std::int64_t attempts, std::int64_t max_steps) {
  EvalReport r;
  r.attempts = attempts;
  for (auto stage : kAllStages) {
    r.stage_successes[index_of(stage)] = evaluate_stage(policy, env, stage, attempts, max_steps).successes;
  }
  r.successes_from_unfold = evaluate(policy, env, StageId::unfold, attempts, max_steps).successes;
  r.successes_from_open = evaluate(policy, env, StageId::open, attempts, max_steps).successes;
  return r;
}

// ---------------------------------------------------------------------------
// Training runs

struct RunResult {
  Algorithm algorithm = Algorithm::pi;
  std::uint64_t seed = 0;
  std::optional<PiTable> pi;
  std::optional<QTable> q;
  std::array<EpisodeLog, 4> logs;
  std::array<double, 4> stage_reward{};  // mean per-step reward while training the stage
  std::int64_t total_steps = 0;
  double train_seconds = 0.0;

  Policy policy() const { return pi ? extract_policy(*pi) : extract_policy(*q); }
  double total_reward() const { return stage_reward[0] + stage_reward[1] + stage_reward[2] + stage_reward[3]; }
};

inline TrainConfig stage_train_config(const ExperimentConfig& cfg, std::uint64_t seed, StageId stage) {
  TrainConfig t = cfg.train;
  t.n = cfg.steps_per_stage;
  t.stage = stage;
  t.reset_policy = ResetPolicy::on_stage_exit;
  t.seed = derive_seed(seed, streams::agent + index_of(stage));
  return t;
}

inline BagSim make_experiment_env(const ExperimentConfig& cfg, std::uint64_t seed, std::uint64_t stream) {
  return BagSim(cfg.bag, cfg.sim, cfg.resolved_model(), derive_seed(seed, stream));
}

/// Trains each stage in task order for `steps_per_stage` steps, resetting to
/// the stage whenever the state leaves it. All stages share one table.
inline RunResult run_training(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunResult out;
  out.algorithm = cfg.algorithm;
  out.seed = seed;
  BagSim env = make_experiment_env(cfg, seed, streams::train_env);
  if (cfg.algorithm == Algorithm::pi) {
    out.pi.emplace(cfg.train.update_mode);
  } else {
    out.q.emplace();
  }
  for (auto stage : kAllStages) {
    const TrainConfig t = stage_train_config(cfg, seed, stage);
    auto& log = out.logs[index_of(stage)];
    log = out.pi ? train_into(env, t, *out.pi) : train_q_into(env, t, *out.q);
    out.stage_reward[index_of(stage)] = log.back().cum_reward / static_cast<double>(log.size());
    out.total_steps += static_cast<std::int64_t>(log.size());
  }
  out.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline EvalReport evaluate_run(const ExperimentConfig& cfg, const RunResult& run) {
  BagSim env = make_experiment_env(cfg, run.seed, streams::eval_env);
  EvalReport report = evaluate_report(run.policy(), env, cfg.eval_attempts, cfg.max_steps_per_attempt);
  report.stage_reward = run.stage_reward;
  report.train_seconds = run.train_seconds;
  return report;
}

// ---------------------------------------------------------------------------
// Output files

inline constexpr std::string_view kTrajectoryHeader = "step,stage,action,a_bag,a_o,a_cube,state";
inline constexpr std::string_view kEvalHeader = "start_stage,attempts,successes,success_rate";
inline constexpr std::string_view kReportHeader =
    "attempts,success_unfold,success_open,success_place,success_carry,success_from_unfold,success_from_open,"
    "reward_unfold,reward_open,reward_place,reward_carry,total_reward,total_steps";

inline void write_trajectory(std::ostream& out, const RunResult& run) {
  out << kTrajectoryHeader << '\n';
  for (auto stage : kAllStages) {
    for (const auto& e : run.logs[index_of(stage)]) {
      out << e.step << ',' << to_string(stage) << ',' << action_key(e.action) << ','
          << io::format_double(e.a_bag) << ',' << io::format_double(e.a_o) << ',' << io::format_double(e.a_cube)
          << ',' << to_string(e.state_after) << '\n';
    }
  }
}

inline void write_eval(std::ostream& out, const AttemptSummary& s) {
  out << kEvalHeader << '\n'
      << to_string(s.start) << ',' << s.attempts << ',' << s.successes << ',' << io::format_double(s.rate()) << '\n';
}

inline void write_report(std::ostream& out, const EvalReport& r, std::int64_t total_steps) {
  out << kReportHeader << '\n' << r.attempts;
  for (auto s : r.stage_successes) out << ',' << s;
  out << ',' << r.successes_from_unfold << ',' << r.successes_from_open;
  for (auto v : r.stage_reward) out << ',' << io::format_double(v);
  out << ',' << io::format_double(r.total_reward()) << ',' << total_steps << '\n';
}

/// Writes curve_<stage>.csv, table.csv and report.csv (plus trajectory.csv
/// when asked) under `dir`. Returns the paths written.
inline std::vector<std::filesystem::path> write_run(const std::filesystem::path& dir, const RunResult& run,
                                                    const EvalReport& report, bool dump_trajectory) {
  std::vector<std::filesystem::path> written;
  for (auto stage : kAllStages) {
    const auto path = dir / ("curve_" + std::string(to_string(stage)) + ".csv");
    auto out = io::open_for_write(path);
    write_log(out, run.logs[index_of(stage)]);
    written.push_back(path);
  }
  {
    const auto path = dir / "table.csv";
    auto out = io::open_for_write(path);
    if (run.pi) {
      write_table(out, *run.pi);
    } else {
      write_table(out, *run.q);
    }
    written.push_back(path);
  }
  {
    const auto path = dir / "report.csv";
    auto out = io::open_for_write(path);
    write_report(out, report, run.total_steps);
    written.push_back(path);
  }
  if (dump_trajectory) {
    const auto path = dir / "trajectory.csv";
    auto out = io::open_for_write(path);
    write_trajectory(out, run);
    written.push_back(path);
  }
  for (const auto& p : written) {
    if (!std::filesystem::exists(p)) throw Error(ErrorCode::io, "failed to write '" + p.string() + "'");
  }
  return written;
}

// ---------------------------------------------------------------------------
// Sweeps

inline constexpr std::string_view kSweepHeader =
    "variant,row,seed,algorithm,steps_per_stage,total_steps,reward_unfold,reward_open,reward_place,reward_carry,"
    "total_reward,total_reward_std,success_unfold,success_open,success_place,success_carry,success_from_unfold,"
    "success_from_unfold_std,success_from_open,success_from_open_std,status";

struct SweepRow {
  std::string variant;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::pi;
  std::int64_t steps_per_stage = 0;
  std::optional<RunResult> run;
  std::optional<EvalReport> report;
  std::string error;

  bool ok() const { return error.empty(); }
};

struct SweepResult {
  std::vector<SweepRow> rows;

  bool any_error() const {
    for (const auto& r : rows) {
      if (!r.ok()) return true;
    }
    return false;
  }
};

inline void validate_variants(const std::vector<ExperimentConfig>& variants) {
  if (variants.empty()) throw Error(ErrorCode::invalid_config, "sweep needs at least one variant");
  std::set<std::string> names;
  for (const auto& v : variants) {
    if (!names.insert(v.name).second) {
      throw Error(ErrorCode::invalid_config, "duplicate variant name '" + v.name + "'");
    }
  }
}

/// Runs every (variant, seed) pair. A failing pair is recorded and the rest
/// still run.
inline SweepResult sweep(const std::vector<ExperimentConfig>& variants) {
  validate_variants(variants);
  SweepResult out;
  for (const auto& v : variants) {
    for (auto seed : v.seeds) {
      SweepRow row{v.name, seed, v.algorithm, v.steps_per_stage, std::nullopt, std::nullopt, {}};
      try {
        row.run = run_training(v, seed);
        row.report = evaluate_run(v, *row.run);
      } catch (const std::exception& e) {
        row.run.reset();
        row.report.reset();
        row.error = e.what();
        if (row.error.empty()) row.error = "unknown error";
      }
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

namespace detail {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

inline std::string csv_safe(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

}  // namespace detail

/// One row per (variant, seed), then one summary row per variant holding
/// means over the successful seeds and sample standard deviations.
inline void write_sweep(std::ostream& out, const SweepResult& result) {
  using io::format_double;
  out << kSweepHeader << '\n';
  std::vector<std::string> order;
  std::map<std::string, std::vector<const SweepRow*>> by_variant;
  for (const auto& r : result.rows) {
    if (!by_variant.count(r.variant)) order.push_back(r.variant);
    by_variant[r.variant].push_back(&r);
  }
  for (const auto& name : order) {
    const auto& rows = by_variant[name];
    // reward x4, total reward, success x4, from unfold, from open
    std::vector<std::vector<double>> cols(11);
    std::int64_t steps_per_stage = 0;
    Algorithm algorithm = Algorithm::pi;
    for (const SweepRow* r : rows) {
      steps_per_stage = r->steps_per_stage;
      algorithm = r->algorithm;
      out << r->variant << ",run," << r->seed << ',' << to_string(r->algorithm) << ',' << r->steps_per_stage << ',';
      if (!r->ok()) {
        out << ",,,,,,,,,,,,,,," << "error: " << detail::csv_safe(r->error) << '\n';
        continue;
      }
      const auto& rep = *r->report;
      std::vector<double> m = {rep.stage_reward[0], rep.stage_reward[1], rep.stage_reward[2], rep.stage_reward[3],
                               rep.total_reward(),  rep.rate(rep.stage_successes[0]),
                               rep.rate(rep.stage_successes[1]), rep.rate(rep.stage_successes[2]),
                               rep.rate(rep.stage_successes[3]), rep.rate(rep.successes_from_unfold),
                               rep.rate(rep.successes_from_open)};
      for (std::size_t i = 0; i < m.size(); ++i) cols[i].push_back(m[i]);
      out << r->run->total_steps;
      for (int i = 0; i < 5; ++i) out << ',' << format_double(m[i]);
      out << ',';  // total_reward_std
      for (int i = 5; i < 10; ++i) out << ',' << format_double(m[i]);
      out << ",," << format_double(m[10]) << ",,ok\n";
    }
    std::size_t ok = 0;
    for (const SweepRow* r : rows) ok += r->ok() ? 1 : 0;
    out << name << ",summary,," << to_string(algorithm) << ',' << steps_per_stage << ','
        << 4 * steps_per_stage;
    auto ms = [&](int i) { return detail::mean_std(cols[i]); };
    for (int i = 0; i < 5; ++i) out << ',' << format_double(ms(i).mean);
    out << ',' << format_double(ms(4).std);
    for (int i = 5; i < 10; ++i) out << ',' << format_double(ms(i).mean);
    out << ',' << format_double(ms(9).std) << ',' << format_double(ms(10).mean) << ','
        << format_double(ms(10).std) << ',' << (ok == rows.size() ? "ok" : "partial: " + std::to_string(ok) + "/" +
                                                                               std::to_string(rows.size()) + " ok")
        << '\n';
  }
}

}  // namespace bagrl
