#pragma once

// Seeded stochastic stand-in for a textile bag on the table. Each stage's
// actions carry a hidden quality q in [0,1] that drives transition odds and
// area gains; one action per stage is the planted optimum. Nothing here is
// a cloth model: it only has to produce observations with the right state
// semantics so the learners can be exercised and checked.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "bagrl/environment.hpp"
#include "bagrl/error.hpp"
#include "bagrl/geometry.hpp"
#include "bagrl/task_mdp.hpp"

namespace bagrl {

/// Simulator knobs. Area quantities are fractions of the bag's maxima so the
/// same settings carry across the presets.
struct SimConfig {
  std::array<std::size_t, 4> zeta = {3, 3, 3, 9};
  std::array<PairingMode, 4> pairing = {PairingMode::indexed, PairingMode::cartesian,
                                        PairingMode::cartesian, PairingMode::indexed};
  double noise_fraction = 0.02;     // Gaussian std as a fraction of a_b_max / a_o_max
  double p_refold = 0.15;           // scaled by (1 - q) per open attempt
  double unfold_gain = 0.3;         // bag-area gain per unfold step at q = 1, fraction of a_b_max
  double open_gain = 1.0;           // opening-area gain per open step at q = 1, fraction of a_o_max
  double folded_fraction = 0.5;     // canonical folded area
  double expanded_fraction = 0.85;  // canonical unfolded area
  double opened_fraction = 0.8;     // canonical opening area in the place/carry stages
  double cube_area = 600.0;
  double center_radius_fraction = kDefaultCenterRadiusFraction;

  void validate(const BagParams& p) const {
    for (auto z : zeta) {
      if (z == 0) throw Error(ErrorCode::invalid_config, "zeta must be >= 1 for every stage");
    }
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(noise_fraction) || !in01(p_refold) || !(unfold_gain > 0.0) || !(open_gain > 0.0)) {
      throw Error(ErrorCode::invalid_config, "simulator rates out of range");
    }
    if (!(folded_fraction > 0.0 && folded_fraction * p.a_b_max < p.a_th)) {
      throw Error(ErrorCode::invalid_config, "folded area must lie below a_th");
    }
    if (!(expanded_fraction * p.a_b_max > p.a_th && expanded_fraction <= 1.0)) {
      throw Error(ErrorCode::invalid_config, "expanded area must lie in (a_th, a_b_max]");
    }
    if (!(opened_fraction * p.a_o_max > p.a_oth && opened_fraction <= 1.0)) {
      throw Error(ErrorCode::invalid_config, "opened area must lie in (a_oth, a_o_max]");
    }
    if (!(cube_area > 0.0) || !(center_radius_fraction > 0.0)) {
      throw Error(ErrorCode::invalid_config, "cube_area and center_radius_fraction must be positive");
    }
  }
};

/// Hidden per-action qualities, one vector per stage, indexed like the
/// stage's action space.
struct LatentBagModel {
  std::array<std::vector<double>, 4> quality;

  std::size_t planted_index(StageId stage) const {
    const auto& q = quality[index_of(stage)];
    return static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
  }

  void validate() const {
    for (auto stage : kAllStages) {
      const auto& q = quality[index_of(stage)];
      if (q.empty()) {
        throw Error(ErrorCode::invalid_config, "stage " + std::string(to_string(stage)) + " has no qualities");
      }
      for (double v : q) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::invalid_config, "quality outside [0,1]");
      }
      const double top = *std::max_element(q.begin(), q.end());
      if (std::count(q.begin(), q.end(), top) != 1) {
        throw Error(ErrorCode::invalid_config,
                    "stage " + std::string(to_string(stage)) + " needs a unique best action");
      }
    }
  }
};

namespace sim_detail {

// Default bag layout in a 640x480 camera frame.
struct Layout {
  geometry::Box bag;      // fully unfolded footprint
  geometry::Box folded;   // folded footprint
  geometry::Box opening;  // nominal opening region
  Point2 opening_center;
  Point2 cube_home;  // where the cube waits on the table
};

inline geometry::Box box_around(Point2 c, double w, double h) {
  return {{c.x - w / 2.0, c.y - h / 2.0}, {c.x + w / 2.0, c.y + h / 2.0}};
}

inline Layout make_layout(const BagParams& p, const SimConfig& cfg) {
  const Point2 center{320.0, 240.0};
  const double aspect = p.bag_width > 0.0 && p.opening_length > 0.0 ? p.bag_width / p.opening_length : 1.0;
  const double w = std::sqrt(p.a_b_max * aspect);
  const double h = p.a_b_max / w;
  const double fold = std::sqrt(cfg.folded_fraction);
  const double side = std::sqrt(p.a_o_max);
  Layout l;
  l.bag = box_around(center, w, h);
  l.folded = box_around(center, w * fold, h * fold);
  l.opening_center = {center.x, center.y - 0.2 * h};
  l.opening = box_around(l.opening_center, side, side);
  l.cube_home = {center.x + 0.75 * w, center.y};
  return l;
}

inline constexpr std::size_t kMarkers = 8;

// A lopsided octagon: no two markers sit at the same distance from the
// centroid or from each other, so the fan's nearest-node choices do not
// depend on rounding and its area scales exactly with the square of the size.
inline std::vector<Point2> unit_markers() {
  static constexpr double radii[kMarkers] = {1.0, 0.9, 0.96, 0.84, 0.98, 0.87, 0.93, 0.81};
  std::vector<Point2> pts;
  for (std::size_t k = 0; k < kMarkers; ++k) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(kMarkers);
    pts.push_back({radii[k] * std::cos(t), 0.8 * radii[k] * std::sin(t)});
  }
  return pts;
}

/// Opening markers around `c` scaled so the fan estimate is close to `area`.
inline std::vector<Point2> markers_for(Point2 c, double area) {
  static const double unit_area = geometry::opening_area(unit_markers());
  const double r = std::sqrt(area / unit_area);
  std::vector<Point2> pts;
  for (const auto& u : unit_markers()) pts.push_back({c.x + r * u.x, c.y + r * u.y});
  return pts;
}

// Peak-shaped score over a zeta x zeta grid: 1 at (row, col), Gaussian falloff
// in cell units, with an index-proportional nudge so ties cannot occur.
// flatness > 1 widens the top into a plateau.
inline std::vector<double> grid_score(std::size_t zeta, double row, double col, double sigma,
                                      double flatness = 1.0) {
  std::vector<double> s;
  for (std::size_t r = 0; r < zeta; ++r) {
    for (std::size_t c = 0; c < zeta; ++c) {
      const double dr = static_cast<double>(r) - row;
      const double dc = static_cast<double>(c) - col;
      const double v = std::exp(-std::pow((dr * dr + dc * dc) / (2.0 * sigma * sigma), flatness));
      s.push_back(v - 1e-9 * static_cast<double>(s.size()));
    }
  }
  return s;
}

inline std::vector<double> combine(const std::vector<double>& prim, const std::vector<double>& comp,
                                   PairingMode mode, double floor, double span) {
  std::vector<double> q;
  if (mode == PairingMode::indexed) {
    for (std::size_t i = 0; i < prim.size(); ++i) q.push_back(std::clamp(floor + span * prim[i] * comp[i], 0.0, 1.0));
  } else {
    for (double p : prim) {
      for (double c : comp) q.push_back(std::clamp(floor + span * p * c, 0.0, 1.0));
    }
  }
  return q;
}

}  // namespace sim_detail

/// Number of action pairs in `stage` for the configured grids and pairing.
inline std::size_t action_count(const SimConfig& cfg, StageId stage) {
  const std::size_t g = cfg.zeta[index_of(stage)] * cfg.zeta[index_of(stage)];
  const std::size_t primary = stage == StageId::place ? 1 : g;
  const std::size_t complementary = g;
  if (cfg.pairing[index_of(stage)] == PairingMode::indexed) {
    if (primary != complementary) {
      throw Error(ErrorCode::invalid_config, "indexed pairing needs equal pose counts in stage " +
                                                 std::string(to_string(stage)));
    }
    return primary;
  }
  return primary * complementary;
}

/// The shipped quality landscape. Unfold peaks at the middle grasp point;
/// open at the top-middle grasp dragged to the bottom-middle place point;
/// place at the opening center; carry on a plateau of grasp points in the
/// lower part of the bag.
inline LatentBagModel default_model(const SimConfig& cfg) {
  using sim_detail::combine;
  using sim_detail::grid_score;
  LatentBagModel m;
  auto mid = [](std::size_t z) { return (static_cast<double>(z) - 1.0) / 2.0; };

  const std::size_t zu = cfg.zeta[0];
  const auto unfold = grid_score(zu, mid(zu), mid(zu), 0.6);
  m.quality[0] = combine(unfold, cfg.pairing[0] == PairingMode::indexed ? std::vector<double>(unfold.size(), 1.0)
                                                                        : unfold,
                         cfg.pairing[0], 0.15, 0.82);

  const std::size_t zo = cfg.zeta[1];
  const auto grasp = grid_score(zo, 0.0, mid(zo), 0.8);
  const auto drag = grid_score(zo, static_cast<double>(zo) - 1.0, mid(zo), 0.8);
  m.quality[1] = combine(grasp, drag, cfg.pairing[1], 0.1, 0.87);

  const std::size_t zp = cfg.zeta[2];
  const auto place = grid_score(zp, mid(zp), mid(zp), 0.8);
  if (cfg.pairing[2] == PairingMode::indexed) {
    m.quality[2] = combine(place, place, PairingMode::indexed, 0.35, 0.61);
  } else {
    m.quality[2] = combine({1.0}, place, PairingMode::cartesian, 0.35, 0.61);
  }

  const std::size_t zc = cfg.zeta[3];
  const auto carry = grid_score(zc, std::round(2.0 * static_cast<double>(zc) / 3.0), mid(zc),
                                0.28 * static_cast<double>(zc), 2.0);
  m.quality[3] = combine(carry, cfg.pairing[3] == PairingMode::indexed ? std::vector<double>(carry.size(), 1.0)
                                                                       : carry,
                         cfg.pairing[3], 0.1, 0.87);
  return m;
}

class BagSim;

namespace inspect {
ActionPair planted_optimum(const BagSim& env, StageId stage);
}

/// The simulated environment. Owns its RNG; one instance per training run.
class BagSim {
 public:
  BagSim(BagParams params, SimConfig cfg, LatentBagModel model, std::uint64_t seed)
      : params_(std::move(params)), cfg_(cfg), model_(std::move(model)), rng_(seed) {
    params_.validate();
    cfg_.validate(params_);
    model_.validate();
    for (auto stage : kAllStages) {
      const std::size_t want = action_count(cfg_, stage);
      const std::size_t got = model_.quality[index_of(stage)].size();
      if (want != got) {
        throw Error(ErrorCode::invalid_config, "stage " + std::string(to_string(stage)) + " has " +
                                                   std::to_string(got) + " qualities but " +
                                                   std::to_string(want) + " actions");
      }
    }
    layout_ = sim_detail::make_layout(params_, cfg_);
    reset(StageId::unfold);
  }

  const BagParams& params() const { return params_; }
  const SimConfig& config() const { return cfg_; }
  StateId state() const { return state_; }
  const Observation& observation() const { return obs_; }
  double center_radius_fraction() const { return cfg_.center_radius_fraction; }

  std::vector<ActionPair> action_space_for(StateId s, const Observation& obs) const {
    return build_action_space(s, obs, cfg_.pairing[index_of(s)]);
  }
  std::vector<ActionPair> action_space() const { return action_space_for(state_, obs_); }

  /// Canonical, noise-free observation for the stage.
  Observation reset(StageId stage) {
    Observation o;
    const double bag_open = cfg_.expanded_fraction * params_.a_b_max;
    const double opened = cfg_.opened_fraction * params_.a_o_max;
    switch (stage) {
      case StageId::unfold:
        o.a_bag = cfg_.folded_fraction * params_.a_b_max;
        break;
      case StageId::open:
        o.a_bag = bag_open;
        o.a_o = 0.5 * params_.a_oth;
        break;
      case StageId::place:
        o.a_bag = bag_open;
        o.a_o = opened;
        break;
      case StageId::carry:
        o.a_bag = bag_open;
        o.a_o = opened;
        o.a_cube = cfg_.cube_area;
        o.cube_position = layout_.opening_center;
        break;
    }
    set_observation(std::move(o), state_of(stage));
    return obs_;
  }

  StepResult step(const ActionPair& action) {
    if (is_terminal(state_)) {
      throw Error(ErrorCode::must_reset, "environment is in terminal state " + std::string(to_string(state_)));
    }
    const std::size_t idx = action_index(action);
    const double q = model_.quality[index_of(stage_of(state_))][idx];
    Observation next = obs_;
    StateId target = state_;
    switch (state_) {
      case StateId::S0: target = step_unfold(next, q); break;
      case StateId::S1: target = step_open(next, q); break;
      case StateId::S2: target = step_place(next, q); break;
      case StateId::S3: target = step_carry(next, q); break;
      default: break;
    }
    set_observation(std::move(next), target);
    return {obs_, state_, is_terminal(state_)};
  }

 private:
  friend ActionPair inspect::planted_optimum(const BagSim& env, StageId stage);

  double noise(double max_value) {
    if (cfg_.noise_fraction == 0.0) return 0.0;
    std::normal_distribution<double> n(0.0, cfg_.noise_fraction * max_value);
    return n(rng_);
  }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  bool chance(double p) { return uniform() < p; }

  // Largest double strictly below `v`.
  static double below(double v) { return std::nextafter(v, 0.0); }

  StateId step_unfold(Observation& o, double q) {
    const double floor_area = 0.05 * params_.a_b_max;
    const double grown = std::clamp(o.a_bag + cfg_.unfold_gain * params_.a_b_max * q + noise(params_.a_b_max),
                                    floor_area, params_.a_b_max);
    if (grown > params_.a_th) {
      if (chance(q)) {
        o.a_bag = grown;
        o.a_o = std::uniform_real_distribution<double>(0.3, 0.9)(rng_) * params_.a_oth;
        settle_opening(o);
        return StateId::S1;
      }
      // Dropped without the opening showing: the bag lands folded again.
      o.a_bag = std::clamp(cfg_.folded_fraction * params_.a_b_max + noise(params_.a_b_max), floor_area,
                           below(params_.a_th));
      return StateId::S0;
    }
    o.a_bag = std::min(grown, below(params_.a_th));
    return StateId::S0;
  }

  StateId step_open(Observation& o, double q) {
    if (chance((1.0 - q) * cfg_.p_refold)) {
      o.a_o = std::uniform_real_distribution<double>(0.1, 0.5)(rng_) * params_.a_oth;
      settle_opening(o);
      return StateId::S1;
    }
    // Kept a hair under a_o_max so the marker estimate cannot round past it.
    o.a_o = std::clamp(o.a_o + cfg_.open_gain * params_.a_o_max * q + noise(params_.a_o_max),
                       0.05 * params_.a_oth, params_.a_o_max * (1.0 - 1e-9));
    settle_opening(o);
    return o.a_o > params_.a_oth ? StateId::S2 : StateId::S1;
  }

  StateId step_place(Observation& o, double q) {
    if (chance(q)) {
      // Lands inside half the in-opening radius.
      const double r = 0.5 * cfg_.center_radius_fraction *
                       geometry::bounding_box(sim_detail::markers_for(layout_.opening_center, o.a_o)).diagonal();
      const double t = 2.0 * std::numbers::pi * uniform();
      const double d = r * uniform();
      o.cube_position = Point2{layout_.opening_center.x + d * std::cos(t), layout_.opening_center.y + d * std::sin(t)};
      o.a_cube = cfg_.cube_area;
      return StateId::S3;
    }
    // Missed: the cube is put back at its pick position.
    o.a_cube = 0.0;
    o.cube_position.reset();
    return StateId::S2;
  }

  StateId step_carry(Observation& o, double q) {
    o.a_bag = 0.0;
    o.a_o = 0.0;
    settle_opening(o);
    if (chance(q)) {
      o.a_cube = 0.0;
      o.cube_position.reset();
      return StateId::S4;
    }
    o.cube_position = layout_.cube_home;
    return StateId::S5;
  }

  /// Places markers for the current opening area and replaces a_o with the
  /// fan estimate over those markers, which is what perception would report.
  void settle_opening(Observation& o) const {
    o.opening_points.clear();
    o.opening_center.reset();
    if (o.a_o > 0.0) {
      o.opening_points = sim_detail::markers_for(layout_.opening_center, o.a_o);
      o.opening_center = geometry::centroid(o.opening_points);
      o.a_o = geometry::opening_area(o.opening_points);
    }
  }

  /// Fills pose sets for `s` (and markers, if the opening changed without
  /// them) and checks the observation classifies as `s`.
  void set_observation(Observation o, StateId s) {
    o.primary_points.clear();
    o.complementary_points.clear();
    if ((o.a_o > 0.0) != !o.opening_points.empty()) settle_opening(o);
    const auto& z = cfg_.zeta;
    switch (s) {
      case StateId::S0:
        o.primary_points = geometry::grid_points(layout_.folded, z[0]);
        o.complementary_points = o.primary_points;
        break;
      case StateId::S1:
        o.primary_points = geometry::grid_points(layout_.opening, z[1]);
        o.complementary_points = geometry::grid_points(layout_.bag, z[1]);
        break;
      case StateId::S2:
        o.primary_points = {layout_.cube_home};
        o.complementary_points = geometry::grid_points(layout_.opening, z[2]);
        break;
      case StateId::S3:
        o.primary_points = geometry::grid_points(layout_.bag, z[3]);
        o.complementary_points = o.primary_points;
        break;
      default:
        break;
    }
    const StateId seen = classify_state(o, params_);
    if (seen != s) {
      throw Error(ErrorCode::contract_violation, "simulator produced an observation classified as " +
                                                     std::string(to_string(seen)) + " for " +
                                                     std::string(to_string(s)));
    }
    obs_ = std::move(o);
    state_ = s;
  }

  /// Position of `action` in the current action space; rejects anything the
  /// current state does not afford.
  std::size_t action_index(const ActionPair& a) const {
    const AffordanceRule rule = affordances(state_);
    const std::size_t np = obs_.primary_points.size();
    const std::size_t nd = obs_.complementary_points.size();
    const bool kinds_ok = a.primary == rule.primary && a.complementary == rule.complementary;
    const bool range_ok = a.primary_pose < np && a.complementary_pose < nd;
    const bool indexed = cfg_.pairing[index_of(state_)] == PairingMode::indexed;
    if (!kinds_ok || !range_ok || (indexed && a.primary_pose != a.complementary_pose)) {
      throw Error(ErrorCode::contract_violation, "action " + action_key(a) + " is not affordable in " +
                                                     std::string(to_string(state_)));
    }
    return indexed ? a.primary_pose : a.primary_pose * nd + a.complementary_pose;
  }

  BagParams params_;
  SimConfig cfg_;
  LatentBagModel model_;
  std::mt19937_64 rng_;
  sim_detail::Layout layout_;
  StateId state_ = StateId::S0;
  Observation obs_;
};

static_assert(Environment<BagSim>);

inline BagSim make_env(const BagParams& params, const LatentBagModel& model, std::uint64_t seed,
                       const SimConfig& cfg = {}) {
  return BagSim(params, cfg, model, seed);
}

inline BagSim make_default_env(std::uint64_t seed, const BagParams& params = presets::bag1(),
                               const SimConfig& cfg = {}) {
  return BagSim(params, cfg, default_model(cfg), seed);
}

namespace inspect {

/// Test/inspection access to the hidden best action of a stage. Learners
/// only see the `Environment` surface and never call this.
inline ActionPair planted_optimum(const BagSim& env, StageId stage) {
  BagSim probe = env;
  probe.reset(stage);
  return probe.action_space()[env.model_.planted_index(stage)];
}

}  // namespace inspect

}  // namespace bagrl
