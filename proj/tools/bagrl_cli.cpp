// bagrl: train, evaluate and compare bagging agents against the simulator.
//
//   bagrl train --config exp.ini [--seed N] [--out DIR] [--dump-trajectory]
//   bagrl eval --table table.csv --start-stage open --attempts 10 [--config exp.ini] [--seed N]
//   bagrl sweep --configs a.ini b.ini ... [--out sweep.csv]
//   bagrl area --points-file pts.txt
//   bagrl dump-config
//
// Outputs default to $BAGRL_OUTPUT_DIR, or ./bagrl_out when unset.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bagrl/config.hpp"
#include "bagrl/geometry.hpp"
#include "bagrl/harness.hpp"
#include "bagrl/io.hpp"

namespace fs = std::filesystem;
using namespace bagrl;

namespace {

fs::path default_output_dir() {
  const char* env = std::getenv("BAGRL_OUTPUT_DIR");
  return env && *env ? fs::path(env) : fs::path("bagrl_out");
}

fs::path output_dir(const std::string& flag, const ExperimentConfig& cfg) {
  if (!flag.empty()) return flag;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return default_output_dir() / cfg.name;
}

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_experiment(path);
}

int cmd_train(const std::string& config, const std::vector<std::uint64_t>& seeds, const std::string& out_flag,
              bool dump) {
  auto cfg = load_experiment(config);
  if (!seeds.empty()) cfg.seeds = seeds;
  const fs::path dir = output_dir(out_flag, cfg);
  for (auto seed : cfg.seeds) {
    const auto run = run_training(cfg, seed);
    const auto report = evaluate_run(cfg, run);
    const auto seed_dir = dir / ("seed_" + std::to_string(seed));
    write_run(seed_dir, run, report, dump);
    std::cerr << cfg.name << " seed " << seed << ": " << run.total_steps << " steps in "
              << io::format_fixed(run.train_seconds, 3) << " s, success from unfold "
              << io::format_fixed(report.rate(report.successes_from_unfold), 2) << ", from open "
              << io::format_fixed(report.rate(report.successes_from_open), 2) << " -> " << seed_dir.string() << '\n';
  }
  return 0;
}

int cmd_eval(const std::string& table_path, const std::string& stage, std::int64_t attempts,
             const std::string& config, std::uint64_t seed, std::int64_t max_steps, const std::string& out) {
  const auto cfg = config_or_default(config);
  auto in = io::open_for_read(table_path);
  const auto table = read_table(in, cfg.train.update_mode);
  const StageId start = stage.empty() ? cfg.eval_start_stage : parse_stage(stage);
  BagSim env = make_experiment_env(cfg, seed, streams::eval_env);
  const auto summary = evaluate(table.policy(), env, start, attempts > 0 ? attempts : cfg.eval_attempts,
                                max_steps > 0 ? max_steps : cfg.max_steps_per_attempt);
  if (out.empty()) {
    write_eval(std::cout, summary);
  } else {
    auto f = io::open_for_write(out);
    write_eval(f, summary);
  }
  return 0;
}

int cmd_sweep(const std::vector<std::string>& configs, const std::string& out_flag) {
  std::vector<ExperimentConfig> variants;
  for (const auto& path : configs) variants.push_back(load_experiment(path));
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = sweep(variants);
  const fs::path out = out_flag.empty() ? default_output_dir() / "sweep.csv" : fs::path(out_flag);
  {
    auto f = io::open_for_write(out);
    write_sweep(f, result);
  }
  for (const auto& row : result.rows) {
    if (!row.ok()) std::cerr << "error: " << row.variant << " seed " << row.seed << ": " << row.error << '\n';
  }
  std::cerr << result.rows.size() << " runs in "
            << io::format_fixed(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 2)
            << " s -> " << out.string() << '\n';
  return result.any_error() ? 1 : 0;
}

int cmd_area(const std::string& path) {
  auto in = io::open_for_read(path);
  std::vector<geometry::Point2> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = io::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto fields = io::split(text, ',');
    if (fields.size() != 2) {
      throw Error(ErrorCode::invalid_input, path + ":" + std::to_string(lineno) + ": expected x,y");
    }
    pts.push_back({io::parse_double(fields[0]), io::parse_double(fields[1])});
  }
  std::cout << io::format_double(geometry::opening_area(pts)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affordance-filtered Pi-learning for robotic bagging, against a seeded bag simulator"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Train every stage and write curves, table and report");
  std::string train_config, train_out;
  std::vector<std::uint64_t> train_seeds;
  bool dump = false;
  train->add_option("--config", train_config, "Experiment INI file")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", train_seeds, "Seed(s); overrides the config's seed list");
  train->add_option("--out", train_out, "Output directory (one seed_<n> subdirectory per seed)");
  train->add_flag("--dump-trajectory", dump, "Also write trajectory.csv");

  auto* eval = app.add_subcommand("eval", "Evaluate a saved table greedily");
  std::string table_path, start_stage, eval_config, eval_out;
  std::int64_t attempts = 0, max_steps = 0;
  std::uint64_t eval_seed = 1;
  eval->add_option("--table", table_path, "Table file written by train")->required();
  eval->add_option("--start-stage", start_stage, "unfold, open, place or carry");
  eval->add_option("--attempts", attempts, "Number of attempts");
  eval->add_option("--config", eval_config, "Experiment INI describing the bag and simulator");
  eval->add_option("--seed", eval_seed, "Simulator seed");
  eval->add_option("--max-steps", max_steps, "Step limit per attempt");
  eval->add_option("--out", eval_out, "Write the CSV here instead of stdout");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run several experiment files and compare them");
  std::vector<std::string> sweep_configs;
  std::string sweep_out;
  sweep_cmd->add_option("--configs", sweep_configs, "Experiment INI files")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", sweep_out, "Comparison CSV path");

  auto* area = app.add_subcommand("area", "Opening area of a marker point list (one x,y per line)");
  std::string points_file;
  area->add_option("--points-file", points_file, "Point file")->required();

  auto* dump_config = app.add_subcommand("dump-config", "Print the bag presets as INI");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_config, train_seeds, train_out, dump);
    if (*eval) return cmd_eval(table_path, start_stage, attempts, eval_config, eval_seed, max_steps, eval_out);
    if (*sweep_cmd) return cmd_sweep(sweep_configs, sweep_out);
    if (*area) return cmd_area(points_file);
    if (*dump_config) {
      std::cout << format_bags(presets::all());
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
