#pragma once

// Tabular learners for the bagging task: the visit-count normalized
// Pi-table, a one-step Q-learning baseline, epsilon-greedy / round-robin
// selection, greedy policy extraction, and the step-budgeted training loops.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bagrl/environment.hpp"
#include "bagrl/error.hpp"
#include "bagrl/io.hpp"
#include "bagrl/task_mdp.hpp"

namespace bagrl {

enum class UpdateMode : std::uint8_t {
  literal,          // m <- m+1; v <- (v + r) / m
  incremental_mean  // m <- m+1; v <- v + (r - v) / m
};

enum class Exploration : std::uint8_t { epsilon_greedy, round_robin };

/// When the training loop puts the environment back at its configured stage.
enum class ResetPolicy : std::uint8_t {
  on_terminal,    // only after S4/S5
  on_stage_exit,  // also whenever the state leaves the configured stage
  every_step      // before every step
};

inline std::string_view to_string(UpdateMode m) {
  return m == UpdateMode::literal ? "literal" : "incremental-mean";
}
inline std::string_view to_string(Exploration e) {
  return e == Exploration::epsilon_greedy ? "epsilon-greedy" : "round-robin";
}
inline std::string_view to_string(ResetPolicy r) {
  switch (r) {
    case ResetPolicy::on_terminal: return "on-terminal";
    case ResetPolicy::on_stage_exit: return "on-stage-exit";
    case ResetPolicy::every_step: return "every-step";
  }
  return "?";
}

inline UpdateMode parse_update_mode(std::string_view t) {
  if (t == "literal" || t == "literal-eq5") return UpdateMode::literal;
  if (t == "incremental-mean" || t == "mean") return UpdateMode::incremental_mean;
  throw Error(ErrorCode::invalid_config, "unknown update mode '" + std::string(t) + "'");
}
inline Exploration parse_exploration(std::string_view t) {
  if (t == "epsilon-greedy") return Exploration::epsilon_greedy;
  if (t == "round-robin") return Exploration::round_robin;
  throw Error(ErrorCode::invalid_config, "unknown exploration schedule '" + std::string(t) + "'");
}
inline ResetPolicy parse_reset_policy(std::string_view t) {
  if (t == "on-terminal") return ResetPolicy::on_terminal;
  if (t == "on-stage-exit") return ResetPolicy::on_stage_exit;
  if (t == "every-step") return ResetPolicy::every_step;
  throw Error(ErrorCode::invalid_config, "unknown reset policy '" + std::string(t) + "'");
}

struct TrainConfig {
  std::int64_t n = 100;
  double epsilon = 0.3;
  UpdateMode update_mode = UpdateMode::literal;
  Exploration exploration = Exploration::epsilon_greedy;
  std::uint64_t seed = 0;
  double alpha = 0.1;
  double gamma = 0.9;
  StageId stage = StageId::unfold;
  ResetPolicy reset_policy = ResetPolicy::on_terminal;
  // Every reward is multiplied by this before the table update.
  double reward_scale = 1.0;

  void validate() const {
    if (n < 1) throw Error(ErrorCode::invalid_config, "training steps n must be >= 1");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error(ErrorCode::invalid_config, "epsilon must lie in [0,1]");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::invalid_config, "alpha must lie in (0,1]");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorCode::invalid_config, "gamma must lie in [0,1]");
    if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) {
      throw Error(ErrorCode::invalid_config, "reward_scale must be positive");
    }
  }
};

using TableKey = std::pair<StateId, ActionPair>;

struct PiEntry {
  double value = 0.0;
  std::uint64_t visits = 0;

  friend bool operator==(const PiEntry&, const PiEntry&) = default;
};

/// Pi-values with visit counts. Unvisited pairs read as {0, 0}.
class PiTable {
 public:
  explicit PiTable(UpdateMode mode = UpdateMode::literal) : mode_(mode) {}

  UpdateMode mode() const { return mode_; }

  PiEntry entry(StateId s, const ActionPair& a) const {
    auto it = entries_.find({s, a});
    return it == entries_.end() ? PiEntry{} : it->second;
  }
  double value(StateId s, const ActionPair& a) const { return entry(s, a).value; }
  std::uint64_t visits(StateId s, const ActionPair& a) const { return entry(s, a).visits; }

  const std::map<TableKey, PiEntry>& entries() const { return entries_; }

  /// One visit with reward `r`; returns the new value.
  double update(StateId s, const ActionPair& a, double r) {
    if (!std::isfinite(r)) throw Error(ErrorCode::invalid_input, "reward must be finite");
    auto& e = entries_[{s, a}];
    e.visits += 1;
    const auto m = static_cast<double>(e.visits);
    if (mode_ == UpdateMode::literal) {
      e.value = (e.value + r) / m;
    } else {
      e.value += (r - e.value) / m;
    }
    return e.value;
  }

  /// Direct assignment, used when loading a persisted table.
  void set(StateId s, const ActionPair& a, PiEntry e) { entries_[{s, a}] = e; }

  friend bool operator==(const PiTable& a, const PiTable& b) { return a.entries_ == b.entries_; }

 private:
  UpdateMode mode_;
  std::map<TableKey, PiEntry> entries_;
};

inline double pi_update(PiTable& table, StateId s, const ActionPair& a, double r) {
  return table.update(s, a, r);
}

class QTable {
 public:
  double value(StateId s, const ActionPair& a) const {
    auto it = values_.find({s, a});
    return it == values_.end() ? 0.0 : it->second;
  }
  void set(StateId s, const ActionPair& a, double q) { values_[{s, a}] = q; }
  const std::map<TableKey, double>& entries() const { return values_; }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::map<TableKey, double> values_;
};

/// Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)); the max term is
/// 0 when `actions_next` is empty (terminal successor).
inline double q_update(QTable& table, StateId s, const ActionPair& a, double r, StateId s_next,
                       std::span<const ActionPair> actions_next, double alpha, double gamma) {
  double best_next = 0.0;
  if (!actions_next.empty()) {
    best_next = table.value(s_next, actions_next.front());
    for (const auto& an : actions_next.subspan(1)) best_next = std::max(best_next, table.value(s_next, an));
  }
  const double q = table.value(s, a);
  const double updated = q + alpha * (r + gamma * best_next - q);
  table.set(s, a, updated);
  return updated;
}

using Policy = std::map<StateId, ActionPair>;

/// Greedy policy: per state, the visited action with the highest value;
/// ties go to the smallest action. States with no visits are left out.
inline Policy extract_policy(const PiTable& table) {
  Policy policy;
  std::map<StateId, double> best;
  for (const auto& [key, e] : table.entries()) {
    if (e.visits == 0) continue;
    auto it = best.find(key.first);
    if (it == best.end() || e.value > it->second) {
      best[key.first] = e.value;
      policy[key.first] = key.second;
    }
  }
  return policy;
}

inline Policy extract_policy(const QTable& table) {
  Policy policy;
  std::map<StateId, double> best;
  for (const auto& [key, q] : table.entries()) {
    auto it = best.find(key.first);
    if (it == best.end() || q > it->second) {
      best[key.first] = q;
      policy[key.first] = key.second;
    }
  }
  return policy;
}

/// Index of the highest-valued action, lowest index on ties.
template <class Table>
std::size_t greedy_index(const Table& table, StateId s, std::span<const ActionPair> actions) {
  std::size_t best = 0;
  double best_value = table.value(s, actions[0]);
  for (std::size_t i = 1; i < actions.size(); ++i) {
    const double v = table.value(s, actions[i]);
    if (v > best_value) {
      best = i;
      best_value = v;
    }
  }
  return best;
}

/// Action selection state: the RNG for epsilon-greedy and the per-state
/// cursor for round-robin.
class ActionSelector {
 public:
  explicit ActionSelector(std::uint64_t seed) : rng_(seed) {}

  template <class Table>
  std::size_t select_index(const Table& table, StateId s, std::span<const ActionPair> actions,
                           const TrainConfig& cfg) {
    if (actions.empty()) {
      throw Error(ErrorCode::no_affordance, "no actions to select from in " + std::string(to_string(s)));
    }
    if (cfg.exploration == Exploration::round_robin) {
      auto& cursor = cursors_[s];
      const std::size_t idx = cursor % actions.size();
      ++cursor;
      return idx;
    }
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng_) < cfg.epsilon) {
      std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
      return pick(rng_);
    }
    return greedy_index(table, s, actions);
  }

  template <class Table>
  const ActionPair& select(const Table& table, StateId s, std::span<const ActionPair> actions,
                           const TrainConfig& cfg) {
    return actions[select_index(table, s, actions, cfg)];
  }

 private:
  std::mt19937_64 rng_;
  std::map<StateId, std::size_t> cursors_;
};

template <class Table>
const ActionPair& select_action(const Table& table, StateId s, std::span<const ActionPair> actions,
                                const TrainConfig& cfg, ActionSelector& selector) {
  return selector.select(table, s, actions, cfg);
}

// ---------------------------------------------------------------------------
// Training loops

struct LogEntry {
  std::int64_t step = 0;
  StateId state = StateId::S0;
  ActionPair action;
  double reward = 0.0;
  double cum_reward = 0.0;
  StateId state_after = StateId::S0;
  // Areas observed after the step, for trajectory dumps.
  double a_bag = 0.0;
  double a_o = 0.0;
  double a_cube = 0.0;

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

using EpisodeLog = std::vector<LogEntry>;

struct PiTrainResult {
  PiTable table;
  EpisodeLog log;
};

struct QTrainResult {
  QTable table;
  EpisodeLog log;
};

namespace detail {

template <Environment Env>
StepResult step_with_context(Env& env, const ActionPair& a, std::int64_t step) {
  try {
    return env.step(a);
  } catch (const Error& e) {
    throw Error(e.code(), "training step " + std::to_string(step) + ": " + e.what());
  }
}

template <Environment Env>
void maybe_reset(Env& env, const TrainConfig& cfg, const StepResult& result) {
  const bool left_stage = result.state != state_of(cfg.stage);
  if (result.terminal || cfg.reset_policy == ResetPolicy::every_step ||
      (cfg.reset_policy == ResetPolicy::on_stage_exit && left_stage)) {
    env.reset(cfg.stage);
  }
}

// Shared loop; `learn(state, action, reward, result)` applies the table update.
template <Environment Env, class Table, class Learn>
EpisodeLog run_loop(Env& env, const TrainConfig& cfg, const Table& table, Learn&& learn) {
  cfg.validate();
  ActionSelector selector(cfg.seed);
  EpisodeLog log;
  log.reserve(static_cast<std::size_t>(cfg.n));
  env.reset(cfg.stage);
  double cum = 0.0;
  for (std::int64_t step = 0; step < cfg.n; ++step) {
    const StateId s = env.state();
    const std::vector<ActionPair> actions = env.action_space();
    const ActionPair a = selector.select(table, s, actions, cfg);
    const StepResult result = step_with_context(env, a, step);
    const double r = transition_reward(env, result) * cfg.reward_scale;
    learn(s, a, r, result);
    cum += r;
    const auto& o = result.observation;
    log.push_back({step, s, a, r, cum, result.state, o.a_bag, o.a_o, o.a_cube});
    maybe_reset(env, cfg, result);
  }
  return log;
}

}  // namespace detail

/// Runs `cfg.n` steps of select -> step -> reward -> Pi update, continuing
/// the given table. The environment is reset to `cfg.stage` first.
template <Environment Env>
EpisodeLog train_into(Env& env, const TrainConfig& cfg, PiTable& table) {
  return detail::run_loop(env, cfg, table, [&](StateId s, const ActionPair& a, double r, const StepResult&) {
    table.update(s, a, r);
  });
}

template <Environment Env>
PiTrainResult train(Env& env, const TrainConfig& cfg) {
  PiTrainResult out{PiTable(cfg.update_mode), {}};
  out.log = train_into(env, cfg, out.table);
  return out;
}

template <Environment Env>
EpisodeLog train_q_into(Env& env, const TrainConfig& cfg, QTable& table) {
  return detail::run_loop(env, cfg, table, [&](StateId s, const ActionPair& a, double r, const StepResult& res) {
    std::vector<ActionPair> next;
    if (!res.terminal) next = env.action_space_for(res.state, res.observation);
    q_update(table, s, a, r, res.state, next, cfg.alpha, cfg.gamma);
  });
}

template <Environment Env>
QTrainResult train_q(Env& env, const TrainConfig& cfg) {
  QTrainResult out;
  out.log = train_q_into(env, cfg, out.table);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline constexpr std::string_view kPiTableHeader = "state,action_key,value,visits";
inline constexpr std::string_view kQTableHeader = "state,action_key,value";
inline constexpr std::string_view kEpisodeLogHeader = "step,state,action,reward,cum_reward";

inline void write_table(std::ostream& out, const PiTable& table) {
  out << kPiTableHeader << '\n';
  for (const auto& [key, e] : table.entries()) {
    out << to_string(key.first) << ',' << action_key(key.second) << ',' << io::format_double(e.value) << ','
        << e.visits << '\n';
  }
}

inline void write_table(std::ostream& out, const QTable& table) {
  out << kQTableHeader << '\n';
  for (const auto& [key, q] : table.entries()) {
    out << to_string(key.first) << ',' << action_key(key.second) << ',' << io::format_double(q) << '\n';
  }
}

/// A table read back from disk; which kind depends on the header line.
struct LoadedTable {
  std::optional<PiTable> pi;
  std::optional<QTable> q;

  Policy policy() const { return pi ? extract_policy(*pi) : extract_policy(*q); }
};

inline LoadedTable read_table(std::istream& in, UpdateMode mode = UpdateMode::literal) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::invalid_input, "empty table file");
  const auto header = io::trim(line);
  LoadedTable out;
  std::size_t columns = 0;
  if (header == kPiTableHeader) {
    out.pi.emplace(mode);
    columns = 4;
  } else if (header == kQTableHeader) {
    out.q.emplace();
    columns = 3;
  } else {
    throw Error(ErrorCode::invalid_input, "unrecognized table header '" + line + "'");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    const auto fields = io::split(io::trim(line), ',');
    if (fields.size() != columns) {
      throw Error(ErrorCode::invalid_input, "table line " + std::to_string(lineno) + " has " +
                                                std::to_string(fields.size()) + " fields");
    }
    const StateId s = parse_state(fields[0]);
    const ActionPair a = parse_action_key(fields[1]);
    const double v = io::parse_double(fields[2]);
    if (out.pi) {
      out.pi->set(s, a, {v, static_cast<std::uint64_t>(io::parse_double(fields[3]))});
    } else {
      out.q->set(s, a, v);
    }
  }
  return out;
}

inline void write_log(std::ostream& out, const EpisodeLog& log) {
  out << kEpisodeLogHeader << '\n';
  for (const auto& e : log) {
    out << e.step << ',' << to_string(e.state) << ',' << action_key(e.action) << ','
        << io::format_double(e.reward) << ',' << io::format_double(e.cum_reward) << '\n';
  }
}

}  // namespace bagrl
