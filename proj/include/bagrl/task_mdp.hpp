#pragma once

// States, observations, primitive actions and affordances of the bagging
// task, plus state classification and the per-transition reward.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bagrl/error.hpp"
#include "bagrl/geometry.hpp"

namespace bagrl {

using geometry::Point2;

enum class StateId : std::uint8_t { S0, S1, S2, S3, S4, S5 };

inline constexpr std::array<StateId, 6> kAllStates = {StateId::S0, StateId::S1, StateId::S2,
                                                      StateId::S3, StateId::S4, StateId::S5};
inline constexpr std::array<StateId, 4> kNonTerminalStates = {StateId::S0, StateId::S1, StateId::S2,
                                                              StateId::S3};

inline constexpr bool is_terminal(StateId s) { return s == StateId::S4 || s == StateId::S5; }
inline constexpr std::size_t index_of(StateId s) { return static_cast<std::size_t>(s); }

inline std::string_view to_string(StateId s) {
  static constexpr std::array<std::string_view, 6> names = {"S0", "S1", "S2", "S3", "S4", "S5"};
  return names[index_of(s)];
}

inline StateId parse_state(std::string_view text) {
  for (auto s : kAllStates) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorCode::invalid_input, "unknown state '" + std::string(text) + "'");
}

/// Training/evaluation phase, one per non-terminal state.
enum class StageId : std::uint8_t { unfold, open, place, carry };

inline constexpr std::array<StageId, 4> kAllStages = {StageId::unfold, StageId::open, StageId::place,
                                                      StageId::carry};

inline constexpr StateId state_of(StageId stage) { return static_cast<StateId>(stage); }
inline constexpr std::size_t index_of(StageId s) { return static_cast<std::size_t>(s); }

inline StageId stage_of(StateId s) {
  if (is_terminal(s)) throw Error(ErrorCode::invalid_input, "terminal state has no stage");
  return static_cast<StageId>(s);
}

inline std::string_view to_string(StageId s) {
  static constexpr std::array<std::string_view, 4> names = {"unfold", "open", "place", "carry"};
  return names[index_of(s)];
}

inline StageId parse_stage(std::string_view text) {
  for (auto s : kAllStages) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorCode::invalid_input, "unknown stage '" + std::string(text) + "'");
}

/// Per-bag thresholds and maxima, in squared workspace units (pixels).
struct BagParams {
  std::string name = "bag1";
  double opening_length = 30.0;  // cm
  double bag_width = 35.0;       // cm
  std::string material = "cotton";
  double a_th = 25000.0;
  double a_oth = 150.0;
  double a_b_max = 34000.0;
  double a_o_max = 3900.0;

  void validate() const {
    const bool finite = std::isfinite(a_th) && std::isfinite(a_oth) && std::isfinite(a_b_max) &&
                        std::isfinite(a_o_max);
    if (!finite || !(0.0 < a_oth && a_oth < a_o_max) || !(0.0 < a_th && a_th < a_b_max)) {
      throw Error(ErrorCode::invalid_params, "bag '" + name + "' needs 0 < a_oth < a_o_max and 0 < a_th < a_b_max");
    }
  }
};

namespace presets {

inline BagParams bag1() { return {"bag1", 30.0, 35.0, "cotton", 25000.0, 150.0, 34000.0, 3900.0}; }
inline BagParams bag2() { return {"bag2", 25.0, 25.0, "polyester", 18000.0, 50.0, 28000.0, 3200.0}; }
inline BagParams bag3() { return {"bag3", 33.0, 26.0, "cotton", 25000.0, 150.0, 34000.0, 3900.0}; }

inline std::vector<BagParams> all() { return {bag1(), bag2(), bag3()}; }

inline BagParams by_name(std::string_view name) {
  for (auto& p : all()) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCode::invalid_config, "unknown bag preset '" + std::string(name) + "'");
}

}  // namespace presets

/// Everything the perception side reports after an action.
struct Observation {
  double a_bag = 0.0;
  double a_o = 0.0;
  double a_cube = 0.0;
  std::vector<Point2> primary_points;        // grasp / pick poses for the current state
  std::vector<Point2> complementary_points;  // lift / drag / place / carry poses
  std::vector<Point2> opening_points;        // markers around the opening
  std::optional<Point2> opening_center;
  std::optional<Point2> cube_position;
};

/// Row-by-row evaluation of the state predicates, most specific first:
/// S4, S5, S3, S2, S1, S0.
inline StateId classify_state(const Observation& obs, const BagParams& params) {
  const double bag = obs.a_bag;
  const double o = obs.a_o;
  const double cube = obs.a_cube;
  if (!std::isfinite(bag) || !std::isfinite(o) || !std::isfinite(cube) || bag < 0.0 || o < 0.0 ||
      cube < 0.0) {
    throw Error(ErrorCode::invalid_input, "observation areas must be finite and non-negative");
  }
  if (bag == 0.0 && o == 0.0 && cube == 0.0) return StateId::S4;
  if (bag == 0.0 && o == 0.0 && cube > 0.0) return StateId::S5;
  if (bag > params.a_th && o > params.a_oth && cube > 0.0) return StateId::S3;
  if (bag > params.a_th && o > params.a_oth && cube == 0.0) return StateId::S2;
  if (bag > params.a_th && o > 0.0 && cube == 0.0) return StateId::S1;
  if (bag < params.a_th && o == 0.0 && cube == 0.0) return StateId::S0;
  throw UnclassifiableObservation(bag, o, cube);
}

/// Default radius fraction (of the opening's bounding-box diagonal) inside
/// which the cube counts as placed at the center of the opening.
inline constexpr double kDefaultCenterRadiusFraction = 0.1;

inline double center_radius(const Observation& obs, double radius_fraction) {
  if (obs.opening_points.empty()) return 0.0;
  return radius_fraction * geometry::bounding_box(obs.opening_points).diagonal();
}

inline bool object_at_center(const Observation& obs,
                             double radius_fraction = kDefaultCenterRadiusFraction) {
  if (!obs.opening_center || !obs.cube_position || obs.opening_points.empty()) return false;
  const double dx = obs.cube_position->x - obs.opening_center->x;
  const double dy = obs.cube_position->y - obs.opening_center->y;
  return std::hypot(dx, dy) <= center_radius(obs, radius_fraction);
}

inline constexpr double kFailReward = -0.1;

/// Reward for landing in `state_after`. Area terms are the normalized
/// ratios A_bag/A_b_max and A_o/A_o_max, clamped to [0, 1].
inline double reward(StateId state_after, const Observation& obs_after, const BagParams& params,
                     bool at_center) {
  if (!(params.a_b_max > 0.0) || !(params.a_o_max > 0.0)) {
    throw Error(ErrorCode::invalid_params, "a_b_max and a_o_max must be positive");
  }
  switch (state_after) {
    case StateId::S0:
    case StateId::S1:
      return std::clamp(obs_after.a_bag / params.a_b_max, 0.0, 1.0);
    case StateId::S2:
      return std::clamp(obs_after.a_o / params.a_o_max, 0.0, 1.0);
    case StateId::S3:
      return at_center ? 1.0 : 0.0;
    case StateId::S4:
      return 1.0;
    case StateId::S5:
      return kFailReward;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Primitive actions and affordances

enum class PrimitiveKind : std::uint8_t { grasp, lift, scratch, drag, pick, place, close, carry };

enum class ActionRole : std::uint8_t { primary, complementary };

inline constexpr std::array<PrimitiveKind, 8> kAllPrimitives = {
    PrimitiveKind::grasp, PrimitiveKind::lift,  PrimitiveKind::scratch, PrimitiveKind::drag,
    PrimitiveKind::pick,  PrimitiveKind::place, PrimitiveKind::close,   PrimitiveKind::carry};

inline constexpr ActionRole role_of(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::grasp:
    case PrimitiveKind::scratch:
    case PrimitiveKind::pick:
    case PrimitiveKind::close:
      return ActionRole::primary;
    default:
      return ActionRole::complementary;
  }
}

inline std::string_view to_string(PrimitiveKind k) {
  static constexpr std::array<std::string_view, 8> names = {"grasp", "lift",  "scratch", "drag",
                                                            "pick",  "place", "close",   "carry"};
  return names[static_cast<std::size_t>(k)];
}

inline PrimitiveKind parse_primitive(std::string_view text) {
  for (auto k : kAllPrimitives) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCode::invalid_input, "unknown primitive '" + std::string(text) + "'");
}

struct AffordanceRule {
  StateId state;
  PrimitiveKind primary;
  PrimitiveKind complementary;

  friend bool operator==(const AffordanceRule&, const AffordanceRule&) = default;
};

/// The four state -> (primary, complementary) rules. The carry-stage primary
/// is labelled `close`; it is the same one-layer grasp that the rule table
/// also writes as `grasp`, and `parse_action_key` accepts either label there.
inline AffordanceRule affordances(StateId state) {
  switch (state) {
    case StateId::S0: return {state, PrimitiveKind::grasp, PrimitiveKind::lift};
    case StateId::S1: return {state, PrimitiveKind::scratch, PrimitiveKind::drag};
    case StateId::S2: return {state, PrimitiveKind::pick, PrimitiveKind::place};
    case StateId::S3: return {state, PrimitiveKind::close, PrimitiveKind::carry};
    default:
      throw Error(ErrorCode::no_affordance, "terminal state " + std::string(to_string(state)) +
                                                " has no affordable actions");
  }
}

/// A primary primitive bound to a pose in `primary_points`, paired with a
/// complementary primitive bound to a pose in `complementary_points`.
/// Ordering is (primary pose, complementary pose), which is also the
/// enumeration order of the action space, so "lowest index" and "smallest
/// pair" coincide within one state.
struct ActionPair {
  PrimitiveKind primary = PrimitiveKind::grasp;
  std::size_t primary_pose = 0;
  PrimitiveKind complementary = PrimitiveKind::lift;
  std::size_t complementary_pose = 0;

  friend bool operator==(const ActionPair&, const ActionPair&) = default;
  friend std::strong_ordering operator<=>(const ActionPair& a, const ActionPair& b) {
    if (auto c = a.primary <=> b.primary; c != 0) return c;
    if (auto c = a.primary_pose <=> b.primary_pose; c != 0) return c;
    if (auto c = a.complementary <=> b.complementary; c != 0) return c;
    return a.complementary_pose <=> b.complementary_pose;
  }
};

/// Stable text key, e.g. `grasp@4/lift@4`.
inline std::string action_key(const ActionPair& a) {
  return std::string(to_string(a.primary)) + "@" + std::to_string(a.primary_pose) + "/" +
         std::string(to_string(a.complementary)) + "@" + std::to_string(a.complementary_pose);
}

namespace detail {

inline std::size_t parse_index(std::string_view text, std::string_view whole) {
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw Error(ErrorCode::invalid_input, "bad pose index in action key '" + std::string(whole) + "'");
  }
  return static_cast<std::size_t>(std::stoull(std::string(text)));
}

}  // namespace detail

inline ActionPair parse_action_key(std::string_view key) {
  const auto slash = key.find('/');
  if (slash == std::string_view::npos) {
    throw Error(ErrorCode::invalid_input, "action key '" + std::string(key) + "' lacks '/'");
  }
  auto half = [&](std::string_view part) {
    const auto at = part.find('@');
    if (at == std::string_view::npos) {
      throw Error(ErrorCode::invalid_input, "action key '" + std::string(key) + "' lacks '@'");
    }
    return std::pair{parse_primitive(part.substr(0, at)), detail::parse_index(part.substr(at + 1), key)};
  };
  auto [pk, pi] = half(key.substr(0, slash));
  auto [ck, ci] = half(key.substr(slash + 1));
  if (role_of(pk) != ActionRole::primary || role_of(ck) != ActionRole::complementary) {
    throw Error(ErrorCode::invalid_input, "action key '" + std::string(key) + "' has roles swapped");
  }
  // Carry-stage grasp is written `close` in the rule table.
  if (pk == PrimitiveKind::grasp && ck == PrimitiveKind::carry) pk = PrimitiveKind::close;
  return {pk, pi, ck, ci};
}

enum class PairingMode : std::uint8_t { cartesian, indexed };

inline std::string_view to_string(PairingMode m) {
  return m == PairingMode::cartesian ? "cartesian" : "indexed";
}

inline PairingMode parse_pairing(std::string_view text) {
  if (text == "cartesian") return PairingMode::cartesian;
  if (text == "indexed") return PairingMode::indexed;
  throw Error(ErrorCode::invalid_config, "unknown pairing mode '" + std::string(text) + "'");
}

/// S0 and S3 bind each lift/carry pose to its grasp point; S1 and S2 pair
/// every primary pose with every complementary pose.
inline PairingMode default_pairing(StateId state) {
  switch (state) {
    case StateId::S0:
    case StateId::S3:
      return PairingMode::indexed;
    default:
      return PairingMode::cartesian;
  }
}

inline std::vector<ActionPair> build_action_space(StateId state, const Observation& obs,
                                                  PairingMode mode) {
  const AffordanceRule rule = affordances(state);
  const std::size_t np = obs.primary_points.size();
  const std::size_t nd = obs.complementary_points.size();
  if (np == 0 || nd == 0) {
    throw Error(ErrorCode::invalid_input, "empty pose set in state " + std::string(to_string(state)));
  }
  std::vector<ActionPair> out;
  if (mode == PairingMode::indexed) {
    if (np != nd) {
      throw Error(ErrorCode::invalid_config, "indexed pairing needs equal pose counts, got " +
                                                 std::to_string(np) + " and " + std::to_string(nd));
    }
    out.reserve(np);
    for (std::size_t i = 0; i < np; ++i) out.push_back({rule.primary, i, rule.complementary, i});
  } else {
    out.reserve(np * nd);
    for (std::size_t i = 0; i < np; ++i) {
      for (std::size_t j = 0; j < nd; ++j) out.push_back({rule.primary, i, rule.complementary, j});
    }
  }
  return out;
}

inline std::vector<ActionPair> build_action_space(StateId state, const Observation& obs) {
  return build_action_space(state, obs, default_pairing(state));
}

/// Size of the action space with no affordance filtering: every primitive
/// at every pose in every state.
inline std::uint64_t full_unfiltered_count(std::uint64_t num_primitives, std::uint64_t num_pose_points,
                                           std::uint64_t num_states) {
  if (num_primitives == 0 || num_pose_points == 0 || num_states == 0) {
    throw Error(ErrorCode::invalid_input, "counts must be at least 1");
  }
  return num_primitives * num_pose_points * num_states;
}

}  // namespace bagrl
