#pragma once

// INI-style experiment files. One file describes a whole experiment:
//
//   [experiment]   run settings (algorithm, budgets, seeds, ...)
//   [sim]          simulator knobs
//   [model]        optional quality lists per stage (unfold/open/place/carry)
//   [<bag name>]   bag parameters, keys as in the bag table
//
// Any section other than experiment/sim/model is read as a bag.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "bagrl/bag_sim.hpp"
#include "bagrl/error.hpp"
#include "bagrl/io.hpp"
#include "bagrl/pi_learning.hpp"
#include "bagrl/task_mdp.hpp"

namespace bagrl {

enum class Algorithm : std::uint8_t { pi, q };

inline std::string_view to_string(Algorithm a) { return a == Algorithm::pi ? "pi" : "q"; }

inline Algorithm parse_algorithm(std::string_view t) {
  if (t == "pi") return Algorithm::pi;
  if (t == "q") return Algorithm::q;
  throw Error(ErrorCode::invalid_config, "unknown algorithm '" + std::string(t) + "'");
}

struct ExperimentConfig {
  std::string name = "default";
  BagParams bag = presets::bag1();
  SimConfig sim;
  std::optional<LatentBagModel> model;  // default_model(sim) when absent
  Algorithm algorithm = Algorithm::pi;
  std::int64_t steps_per_stage = 100;
  TrainConfig train;  // epsilon, update mode, exploration, alpha, gamma
  std::int64_t eval_attempts = 10;
  StageId eval_start_stage = StageId::open;
  std::int64_t max_steps_per_attempt = 50;
  std::vector<std::uint64_t> seeds = {1};
  std::string output_dir;

  LatentBagModel resolved_model() const { return model ? *model : default_model(sim); }

  void validate() const {
    if (name.empty() || name.find_first_of(",/\\\n") != std::string::npos) {
      throw Error(ErrorCode::invalid_config, "experiment name must be non-empty without , / or \\");
    }
    bag.validate();
    sim.validate(bag);
    if (steps_per_stage < 1) throw Error(ErrorCode::invalid_config, "steps_per_stage must be >= 1");
    if (eval_attempts < 1) throw Error(ErrorCode::invalid_config, "eval_attempts must be >= 1");
    if (max_steps_per_attempt < 1) throw Error(ErrorCode::invalid_config, "max_steps_per_attempt must be >= 1");
    if (seeds.empty()) throw Error(ErrorCode::invalid_config, "at least one seed is required");
    TrainConfig probe = train;
    probe.n = steps_per_stage;
    probe.validate();
    const auto m = resolved_model();
    m.validate();
    for (auto stage : kAllStages) {
      if (m.quality[index_of(stage)].size() != action_count(sim, stage)) {
        throw Error(ErrorCode::invalid_config, "model size does not match the action space of stage " +
                                                   std::string(to_string(stage)));
      }
    }
  }
};

namespace config_detail {

using boost::property_tree::ptree;

inline std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  for (auto field : io::split(text, ',')) {
    if (!io::trim(field).empty()) out.push_back(io::parse_double(field));
  }
  return out;
}

inline double number(const ptree& section, const std::string& key, double fallback) {
  const auto v = section.get_optional<std::string>(key);
  return v ? io::parse_double(*v) : fallback;
}

inline std::int64_t integer(const ptree& section, const std::string& key, std::int64_t fallback) {
  const auto v = section.get_optional<std::string>(key);
  if (!v) return fallback;
  const double d = io::parse_double(*v);
  if (d != static_cast<double>(static_cast<std::int64_t>(d))) {
    throw Error(ErrorCode::invalid_config, "key '" + key + "' must be an integer");
  }
  return static_cast<std::int64_t>(d);
}

inline BagParams read_bag(const std::string& name, const ptree& s) {
  BagParams p;
  p.name = s.get<std::string>("name", name);
  p.opening_length = number(s, "opening_length", 0.0);
  p.bag_width = number(s, "bag_width", 0.0);
  p.material = s.get<std::string>("material", "");
  p.a_th = number(s, "a_th", 0.0);
  p.a_oth = number(s, "a_oth", 0.0);
  p.a_b_max = number(s, "a_b_max", 0.0);
  p.a_o_max = number(s, "a_o_max", 0.0);
  p.validate();
  return p;
}

inline SimConfig read_sim(const ptree& s) {
  SimConfig c;
  if (auto z = s.get_optional<std::string>("zeta")) {
    const auto v = parse_list(*z);
    if (v.size() != 4) throw Error(ErrorCode::invalid_config, "sim.zeta needs 4 entries");
    for (std::size_t i = 0; i < 4; ++i) c.zeta[i] = static_cast<std::size_t>(v[i]);
  }
  if (auto p = s.get_optional<std::string>("pairing")) {
    const auto fields = io::split(*p, ',');
    if (fields.size() != 4) throw Error(ErrorCode::invalid_config, "sim.pairing needs 4 entries");
    for (std::size_t i = 0; i < 4; ++i) c.pairing[i] = parse_pairing(io::trim(fields[i]));
  }
  c.noise_fraction = number(s, "noise_fraction", c.noise_fraction);
  c.p_refold = number(s, "p_refold", c.p_refold);
  c.unfold_gain = number(s, "unfold_gain", c.unfold_gain);
  c.open_gain = number(s, "open_gain", c.open_gain);
  c.folded_fraction = number(s, "folded_fraction", c.folded_fraction);
  c.expanded_fraction = number(s, "expanded_fraction", c.expanded_fraction);
  c.opened_fraction = number(s, "opened_fraction", c.opened_fraction);
  c.cube_area = number(s, "cube_area", c.cube_area);
  c.center_radius_fraction = number(s, "center_radius_fraction", c.center_radius_fraction);
  return c;
}

}  // namespace config_detail

inline ExperimentConfig parse_experiment(std::istream& in) {
  using config_detail::integer;
  using config_detail::number;
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::invalid_config, e.what());
  }
  ExperimentConfig cfg;
  const auto empty = boost::property_tree::ptree{};
  const auto& ex = tree.get_child("experiment", empty);

  cfg.name = ex.get<std::string>("name", cfg.name);
  const std::string bag_name = ex.get<std::string>("bag", "bag1");
  if (auto bag = tree.get_child_optional(bag_name)) {
    cfg.bag = config_detail::read_bag(bag_name, *bag);
  } else {
    cfg.bag = presets::by_name(bag_name);
  }
  cfg.algorithm = parse_algorithm(ex.get<std::string>("algorithm", "pi"));
  cfg.steps_per_stage = integer(ex, "steps_per_stage", cfg.steps_per_stage);
  cfg.train.epsilon = number(ex, "epsilon", cfg.train.epsilon);
  cfg.train.update_mode = parse_update_mode(ex.get<std::string>("update_mode", "literal"));
  cfg.train.exploration = parse_exploration(ex.get<std::string>("exploration", "epsilon-greedy"));
  cfg.train.alpha = number(ex, "alpha", cfg.train.alpha);
  cfg.train.gamma = number(ex, "gamma", cfg.train.gamma);
  cfg.eval_attempts = integer(ex, "eval_attempts", cfg.eval_attempts);
  cfg.eval_start_stage = parse_stage(ex.get<std::string>("eval_start_stage", "open"));
  cfg.max_steps_per_attempt = integer(ex, "max_steps_per_attempt", cfg.max_steps_per_attempt);
  if (auto seeds = ex.get_optional<std::string>("seeds")) {
    cfg.seeds.clear();
    for (double s : config_detail::parse_list(*seeds)) {
      if (s < 0 || s != static_cast<double>(static_cast<std::uint64_t>(s))) {
        throw Error(ErrorCode::invalid_config, "seeds must be non-negative integers");
      }
      cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  cfg.output_dir = ex.get<std::string>("output_dir", "");

  if (auto sim = tree.get_child_optional("sim")) cfg.sim = config_detail::read_sim(*sim);
  if (auto model = tree.get_child_optional("model")) {
    LatentBagModel m = default_model(cfg.sim);
    for (auto stage : kAllStages) {
      if (auto list = model->get_optional<std::string>(std::string(to_string(stage)))) {
        m.quality[index_of(stage)] = config_detail::parse_list(*list);
      }
    }
    cfg.model = m;
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_experiment(const std::string& text) {
  std::istringstream in(text);
  return parse_experiment(in);
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  auto in = io::open_for_read(path);
  try {
    return parse_experiment(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

/// Bag parameters as INI, one section per bag.
inline std::string format_bags(const std::vector<BagParams>& bags) {
  std::ostringstream out;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const auto& b = bags[i];
    if (i > 0) out << '\n';
    out << '[' << b.name << "]\n"
        << "name = " << b.name << '\n'
        << "opening_length = " << io::format_double(b.opening_length) << '\n'
        << "bag_width = " << io::format_double(b.bag_width) << '\n'
        << "material = " << b.material << '\n'
        << "a_th = " << io::format_double(b.a_th) << '\n'
        << "a_oth = " << io::format_double(b.a_oth) << '\n'
        << "a_b_max = " << io::format_double(b.a_b_max) << '\n'
        << "a_o_max = " << io::format_double(b.a_o_max) << '\n';
  }
  return out.str();
}

/// Reads every bag section from an INI stream.
inline std::vector<BagParams> parse_bags(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::invalid_config, e.what());
  }
  std::vector<BagParams> out;
  for (const auto& [name, section] : tree) {
    if (name == "experiment" || name == "sim" || name == "model") continue;
    out.push_back(config_detail::read_bag(name, section));
  }
  return out;
}

}  // namespace bagrl
