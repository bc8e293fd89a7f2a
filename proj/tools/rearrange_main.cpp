// Command-line front end: batch experiments, parameter sweeps, scenario
// linting, and SVG rendering of executed traces.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rearrange/experiment.hpp"
#include "rearrange/svg.hpp"

namespace fs = std::filesystem;
using namespace rearrange;

namespace {

std::string output_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("REARRANGE_OUT_DIR")) return env;
  return ".";
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << content;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::string cell_stem(const Scenario& sc, const ExperimentSpec& spec) {
  std::string stem = sc.name + "_" + to_string(spec.planner);
  char buf[64];
  if (spec.perturb.has_value()) {
    std::snprintf(buf, sizeof(buf), "_p%g", spec.perturb->interval);
    stem += buf;
  }
  if (spec.reduce_rate.has_value()) {
    std::snprintf(buf, sizeof(buf), "_r%g", *spec.reduce_rate);
    stem += buf;
  }
  return stem;
}

// Runs one batch and writes its CSV (and optional per-trial traces).
BatchResult run_cell(const Scenario& sc, const ExperimentSpec& spec, const fs::path& dir,
                     bool traces) {
  const std::string stem = cell_stem(sc, spec);
  std::vector<std::shared_ptr<std::ofstream>> files;
  std::function<TraceSink(int)> trace_for;
  if (traces) {
    trace_for = [&, stem](int trial) -> TraceSink {
      auto file = std::make_shared<std::ofstream>(
          dir / (stem + "_trial" + std::to_string(trial) + ".trace.jsonl"));
      files.push_back(file);
      return [file](const TraceRecord& r) { (*file) << trace_to_line(r) << "\n"; };
    };
  }
  BatchResult result = run_experiment(sc, spec, trace_for);
  write_text(dir / (stem + ".csv"), to_csv(result.records));
  std::cout << summary_line(stem, result.summary) << "\n";
  return result;
}

SystemState state_from_trace(const Scenario& sc, const TraceRecord& r) {
  SystemState q;
  q.joints = r.joints;
  q.objects = r.objects;
  q.ee = r.ee;
  q.valid = true;
  (void)sc;
  return q;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kinodynamic rearrangement planning toolkit"};
  app.require_subcommand(1);

  std::string scenario_path, out_flag, trace_path;
  std::string planner_name = "dhrrt";
  int trials = 20;
  std::uint64_t seed = 0;
  double budget = 60.0;
  double perturb_interval = 0.0, perturb_speed = 0.4;
  double reduce_rate = 0.0;
  double goal_bias = -1.0, goal_bias_radius = -1.0, progress = -1.0;
  double max_linear = -1.0;
  int max_depth = -1, candidates = -1;
  bool traces = false;

  const auto add_common = [&](CLI::App* cmd, bool with_planner) {
    cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    cmd->add_option("--out", out_flag, "output directory (default: $REARRANGE_OUT_DIR or .)");
    if (with_planner) {
      cmd->add_option("--planner", planner_name, "kdrrt|rkdrrt|dhrrt");
      cmd->add_option("--trials", trials, "trials per batch");
      cmd->add_option("--seed", seed, "seed base; trial k uses seed base + k");
      cmd->add_option("--budget", budget, "simulated planning budget per trial, seconds");
      cmd->add_option("--perturb-speed", perturb_speed,
                      "perturbation speed in m/s (applied for 0.1 s)");
      cmd->add_option("--goal-bias", goal_bias, "fraction of samples drawn near the task focus");
      cmd->add_option("--goal-bias-radius", goal_bias_radius, "bias disc radius, meters");
      cmd->add_option("--progress", progress, "horizon progress threshold p");
      cmd->add_option("--max-linear-speed", max_linear, "end-effector speed cap, m/s");
      cmd->add_option("--max-depth", max_depth, "tree depth limit D_max");
      cmd->add_option("--candidates", candidates, "sampled twists per expansion M");
      cmd->add_flag("--trace", traces, "write per-trial execution traces");
    }
  };

  CLI::App* run = app.add_subcommand("run", "run one experiment batch");
  add_common(run, true);
  run->add_option("--perturb-interval", perturb_interval,
                  "simulated seconds between kicks (0 = no perturbation)");
  run->add_option("--reduce-rate", reduce_rate,
                  "planner-side vertex reduction fraction in (0,1] (0 = off)");

  std::vector<std::string> sweep_planners{"dhrrt", "rkdrrt", "kdrrt"};
  std::vector<double> sweep_intervals, sweep_rates;
  CLI::App* sweep = app.add_subcommand("sweep", "grid over planners x perturbation x reduction");
  add_common(sweep, true);
  sweep->add_option("--planners", sweep_planners, "planners to sweep")->delimiter(',');
  sweep->add_option("--perturb-interval", sweep_intervals, "perturbation intervals to sweep")
      ->delimiter(',');
  sweep->add_option("--reduce-rate", sweep_rates, "reduction rates to sweep")->delimiter(',');

  CLI::App* render = app.add_subcommand("render", "render a scenario (optionally with a trace)");
  add_common(render, false);
  render->add_option("--trace", trace_path, "execution trace to overlay (final state + path)");

  CLI::App* validate_cmd = app.add_subcommand("validate", "lint a scenario file");
  validate_cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const Scenario sc = load_scenario(scenario_path);

    if (validate_cmd->parsed()) {
      std::cout << "OK: " << sc.name << " (" << sc.object_count() << " objects, "
                << sc.obstacles.size() << " obstacles)\n";
      return 0;
    }

    const fs::path dir = output_dir(out_flag);
    fs::create_directories(dir);

    if (render->parsed()) {
      SystemState state = initial_state(sc);
      std::vector<Vec2> path;
      if (!trace_path.empty()) {
        const auto records = load_trace(trace_path);
        if (records.empty()) throw std::runtime_error(trace_path + ": empty trace");
        for (const TraceRecord& r : records) path.push_back({r.ee.x, r.ee.y});
        state = state_from_trace(sc, records.back());
      }
      const fs::path file = dir / (sc.name + ".svg");
      write_text(file, render_svg(sc, state, path));
      std::cout << "wrote " << file.string() << "\n";
      return 0;
    }

    ExperimentSpec spec;
    spec.trials = trials;
    spec.seed_base = seed;
    spec.time_budget = budget;
    spec.config = default_planner_config(sc);
    if (goal_bias >= 0) spec.config.goal_bias = goal_bias;
    if (goal_bias_radius >= 0) spec.config.goal_bias_radius = goal_bias_radius;
    if (progress >= 0) spec.config.progress_threshold = progress;
    if (max_linear > 0) spec.config.max_linear_speed = max_linear;
    if (max_depth > 0) spec.config.max_depth = max_depth;
    if (candidates > 0) spec.config.candidates = candidates;

    if (run->parsed()) {
      spec.planner = planner_from_string(planner_name);
      if (perturb_interval > 0) spec.perturb = PerturbSpec{perturb_interval, perturb_speed, 0.1};
      if (reduce_rate > 0) spec.reduce_rate = reduce_rate;
      run_cell(sc, spec, dir, traces);
      return 0;
    }

    // sweep: cross product of planners x intervals x rates (absent axis = off)
    std::vector<std::optional<double>> intervals{std::nullopt}, rates{std::nullopt};
    if (!sweep_intervals.empty()) {
      intervals.clear();
      for (double v : sweep_intervals) intervals.emplace_back(v);
    }
    if (!sweep_rates.empty()) {
      rates.clear();
      for (double v : sweep_rates) rates.emplace_back(v);
    }
    for (const std::string& name : sweep_planners) {
      spec.planner = planner_from_string(name);
      for (const auto& interval : intervals) {
        spec.perturb.reset();
        if (interval.has_value()) spec.perturb = PerturbSpec{*interval, perturb_speed, 0.1};
        for (const auto& rate : rates) {
          spec.reduce_rate = rate;
          run_cell(sc, spec, dir, traces);
        }
      }
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
