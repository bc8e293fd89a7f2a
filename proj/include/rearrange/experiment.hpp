#pragma once

#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rearrange/planner.hpp"
#include "rearrange/scenario_io.hpp"

namespace rearrange {

enum class PlannerKind { kKdrrt, kRkdrrt, kDhrrt };

inline const char* to_string(PlannerKind k) {
  switch (k) {
    case PlannerKind::kKdrrt: return "kdrrt";
    case PlannerKind::kRkdrrt: return "rkdrrt";
    case PlannerKind::kDhrrt: return "dhrrt";
  }
  return "?";
}

inline PlannerKind planner_from_string(const std::string& name) {
  if (name == "kdrrt") return PlannerKind::kKdrrt;
  if (name == "rkdrrt") return PlannerKind::kRkdrrt;
  if (name == "dhrrt") return PlannerKind::kDhrrt;
  throw std::invalid_argument("unknown planner '" + name + "' (expected kdrrt|rkdrrt|dhrrt)");
}

struct PerturbSpec {
  double interval = 2.0;  // simulated execution seconds between kicks
  double speed = 0.4;     // m/s applied for a fixed 0.1 s
  double duration = 0.1;
};

struct ExperimentSpec {
  PlannerKind planner = PlannerKind::kDhrrt;
  int trials = 20;
  std::uint64_t seed_base = 0;
  double time_budget = 60.0;
  std::optional<PerturbSpec> perturb;
  std::optional<double> reduce_rate;
  PlannerConfig config;  // seed and budget are overwritten per trial
};

inline void validate(const ExperimentSpec& spec) {
  if (spec.trials < 1) throw std::invalid_argument("experiment: trials must be >= 1");
  if (!(spec.time_budget > 0)) throw std::invalid_argument("experiment: budget must be > 0");
  if (spec.perturb.has_value() &&
      (!(spec.perturb->interval > 0) || spec.perturb->speed < 0))
    throw std::invalid_argument("experiment: perturbation needs interval > 0 and speed >= 0");
}

struct TrialRecord {
  int trial = 0;
  PlannerKind planner = PlannerKind::kDhrrt;
  std::uint64_t seed = 0;
  bool success = false;
  double planning_time = 0.0;
  int nodes_added = 0;
  int replans = 0;
  int segments_executed = 0;
  SystemState final_state;
};

struct BatchSummary {
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  double time_mean = 0.0;  // over successful trials only
  double time_std = 0.0;
  double nodes_per_s = 0.0;  // total nodes / total planning time, all trials
};

/// The simulated "real world": replays joint-space segments with the true
/// object shapes, kicking a random object whenever the execution clock
/// crosses a multiple of the perturbation interval.  Execution halts before
/// any segment whose outcome would be invalid; the planner replans from the
/// observation.  One executor instance carries its clock across replans.
inline Executor make_sim_executor(const Scenario& sc, std::optional<PerturbSpec> perturb,
                                  Rng rng, TraceSink trace = {}) {
  struct ExecState {
    double clock = 0.0;
    double next_kick = 0.0;
    Rng rng;
  };
  auto st = std::make_shared<ExecState>();
  st->rng = rng;
  st->next_kick = perturb.has_value() ? perturb->interval : 0.0;
  return [&sc, perturb, st, trace](const SystemState& from,
                                   const std::vector<ControlSegment>& controls) {
    ExecutionFeedback fb{from, 0};
    for (const ControlSegment& seg : controls) {
      SimOptions opts;
      opts.trace = trace;
      opts.trace_time0 = st->clock;
      SystemState next = simulate_segment(sc, sc.arm, sc.physics, fb.observed, seg, opts);
      if (!next.valid) return fb;  // halt before the failed segment
      st->clock += seg.duration();
      if (perturb.has_value() && perturb->speed > 0) {
        while (st->clock >= st->next_kick - 1e-12) {
          next = rearrange::perturb(next, st->rng, perturb->speed, perturb->duration, sc.arm,
                                    sc, sc.physics);
          st->next_kick += perturb->interval;
          if (!next.valid) break;
        }
      }
      fb.observed = std::move(next);
      ++fb.completed;
      if (!fb.observed.valid) return fb;  // a kick ejected an object
    }
    return fb;
  };
}

inline PlannerConfig default_planner_config(const Scenario& sc) {
  PlannerConfig cfg;
  // pushing longer objects around needs longer pushes per expansion
  cfg.control_duration = std::holds_alternative<SortTask>(sc.task) ? 0.4 : 0.2;
  return cfg;
}

inline TrialRecord run_trial(const Scenario& sc, const ExperimentSpec& spec, int trial,
                             TraceSink trace = {}, const PlanEventSink& events = {}) {
  const std::uint64_t trial_seed = spec.seed_base + static_cast<std::uint64_t>(trial);
  PlannerConfig cfg = spec.config;
  cfg.time_budget = spec.time_budget;
  cfg.seed = Rng::derive(trial_seed, 0, 0).raw();
  const Executor exec = make_sim_executor(sc, spec.perturb, Rng::derive(trial_seed, 1, 0), trace);

  PlanOutcome out;
  switch (spec.planner) {
    case PlannerKind::kDhrrt: out = plan_dhrrt(sc, cfg, exec, events); break;
    case PlannerKind::kRkdrrt: out = plan_kdrrt(sc, cfg, exec, true, events); break;
    case PlannerKind::kKdrrt: out = plan_kdrrt(sc, cfg, exec, false, events); break;
  }

  TrialRecord rec;
  rec.trial = trial;
  rec.planner = spec.planner;
  rec.seed = trial_seed;
  rec.success = out.success;
  rec.planning_time = out.planning_time;
  rec.nodes_added = out.nodes_added;
  rec.replans = out.replans;
  rec.segments_executed = out.segments_executed;
  rec.final_state = out.final_state;
  return rec;
}

/// Re-derives the goal flag from the recorded final state; a disagreement
/// with the stored success flag means the planner lied about its outcome.
inline BatchSummary summarize(const std::vector<TrialRecord>& records, const Scenario& sc) {
  BatchSummary s;
  s.trials = static_cast<int>(records.size());
  double time_sum = 0.0, total_time = 0.0;
  long long total_nodes = 0;
  for (const TrialRecord& r : records) {
    const bool at_goal = r.final_state.valid && is_valid(r.final_state, sc.arm, sc) &&
                         goal_satisfied(r.final_state, sc);
    if (at_goal != r.success)
      throw std::logic_error("metrics: success flag disagrees with the recorded final state");
    if (r.success) {
      ++s.successes;
      time_sum += r.planning_time;
    }
    total_time += r.planning_time;
    total_nodes += r.nodes_added;
  }
  s.success_rate = s.trials ? static_cast<double>(s.successes) / s.trials : 0.0;
  if (s.successes > 0) {
    s.time_mean = time_sum / s.successes;
    double var = 0.0;
    for (const TrialRecord& r : records)
      if (r.success) var += (r.planning_time - s.time_mean) * (r.planning_time - s.time_mean);
    s.time_std = std::sqrt(var / s.successes);
  }
  s.nodes_per_s = total_time > 0 ? static_cast<double>(total_nodes) / total_time : 0.0;
  return s;
}

struct BatchResult {
  std::vector<TrialRecord> records;
  BatchSummary summary;
};

inline BatchResult run_experiment(const Scenario& scenario, const ExperimentSpec& spec,
                                  const std::function<TraceSink(int)>& trace_for = {}) {
  validate(spec);
  Scenario sc = scenario;
  if (spec.reduce_rate.has_value()) apply_reduction(sc, *spec.reduce_rate);
  BatchResult out;
  out.records.reserve(static_cast<size_t>(spec.trials));
  for (int k = 0; k < spec.trials; ++k)
    out.records.push_back(run_trial(sc, spec, k, trace_for ? trace_for(k) : TraceSink{}));
  out.summary = summarize(out.records, sc);
  return out;
}

// ---- CSV emission (byte-stable across reruns) ----

inline std::string csv_header() {
  return "trial,planner,seed,success,planning_time_s,nodes_added,nodes_per_s,replans,"
         "segments_executed";
}

inline std::string to_csv_row(const TrialRecord& r) {
  const double rate = r.planning_time > 0 ? r.nodes_added / r.planning_time : 0.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%s,%llu,%d,%.6f,%d,%.6f,%d,%d", r.trial,
                to_string(r.planner), static_cast<unsigned long long>(r.seed),
                r.success ? 1 : 0, r.planning_time, r.nodes_added, rate, r.replans,
                r.segments_executed);
  return buf;
}

inline std::string to_csv(const std::vector<TrialRecord>& records) {
  std::string out = csv_header();
  out += '\n';
  for (const TrialRecord& r : records) {
    out += to_csv_row(r);
    out += '\n';
  }
  return out;
}

inline std::string summary_line(const std::string& label, const BatchSummary& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%s: success %d/%d (%.0f%%), time %.2f +/- %.2f s (successes), %.2f nodes/s",
                label.c_str(), s.successes, s.trials, 100.0 * s.success_rate, s.time_mean,
                s.time_std, s.nodes_per_s);
  return buf;
}

}  // namespace rearrange
