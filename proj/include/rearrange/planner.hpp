#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rearrange/physics.hpp"
#include "rearrange/tasks.hpp"

namespace rearrange {

// Search parameters shared by dhRRT and the kdRRT baselines.  The dynamic
// horizon is governed by the progress threshold and the depth limit; the
// baselines ignore both and plan straight to the goal region.
struct PlannerConfig {
  int candidates = 10;              // controls sampled per expansion (M)
  double progress_threshold = 0.1;  // heuristic drop that triggers execution (p)
  int max_depth = 10;               // tree depth that forces execution (D_max)
  double time_budget = 60.0;        // simulated planning seconds
  double max_linear_speed = kMaxLinearSpeed;
  double max_angular_speed = kMaxAngularSpeed;
  double control_duration = 0.2;  // seconds per sampled twist
  double w_robot = 1.0;
  double w_object = 0.5;
  double angular_scale = 0.1;  // metres per radian of gripper heading error
  double goal_bias = 0.0;      // probability of steering samples near the focus
  double goal_bias_radius = 0.1;
  std::uint64_t seed = 0;
};

inline void validate(const PlannerConfig& cfg) {
  if (cfg.candidates < 1) throw std::invalid_argument("planner: candidates must be >= 1");
  if (!(cfg.progress_threshold > 0)) throw std::invalid_argument("planner: progress threshold must be > 0");
  if (cfg.max_depth < 1) throw std::invalid_argument("planner: max depth must be >= 1");
  if (!(cfg.time_budget > 0)) throw std::invalid_argument("planner: time budget must be > 0");
  if (cfg.goal_bias < 0 || cfg.goal_bias >= 1) throw std::invalid_argument("planner: goal bias must lie in [0,1)");
}

// Weighted workspace metric used for steering.  Object headings are ignored:
// pushing controls translation far more directly than object rotation.
inline double state_distance(const SystemState& a, const SystemState& b,
                             const PlannerConfig& cfg) {
  if (a.objects.size() != b.objects.size())
    throw std::invalid_argument("state_distance: object counts differ");
  double d = std::hypot(a.ee.x - b.ee.x, a.ee.y - b.ee.y) +
             cfg.angular_scale * angular_distance(a.ee.theta, b.ee.theta);
  d *= cfg.w_robot;
  for (size_t i = 0; i < a.objects.size(); ++i)
    d += cfg.w_object *
         std::hypot(a.objects[i].x - b.objects[i].x, a.objects[i].y - b.objects[i].y);
  return d;
}

// Steering target: gripper and object poses drawn uniformly over the
// workspace (optionally biasing the gripper toward a task focus point).
// The result carries no joint configuration -- it is never simulated.
inline SystemState sample_state(Rng& rng, const Scenario& sc, const PlannerConfig& cfg,
                                const std::optional<Vec2>& focus = std::nullopt) {
  SystemState q;
  q.valid = true;
  const Rect& w = sc.workspace;
  bool biased = false;
  if (cfg.goal_bias > 0 && focus.has_value()) biased = rng.uniform01() < cfg.goal_bias;
  if (biased) {
    const double r = cfg.goal_bias_radius * std::sqrt(rng.uniform01());
    const double phi = rng.angle();
    q.ee = Pose2{focus->x + r * std::cos(phi), focus->y + r * std::sin(phi), rng.angle()};
  } else {
    q.ee = Pose2{rng.uniform(w.min.x, w.max.x), rng.uniform(w.min.y, w.max.y), rng.angle()};
  }
  q.objects.reserve(sc.objects.size());
  for (size_t i = 0; i < sc.objects.size(); ++i)
    q.objects.push_back(
        Pose2{rng.uniform(w.min.x, w.max.x), rng.uniform(w.min.y, w.max.y), rng.angle()});
  return q;
}

struct TreeNode {
  SystemState state;
  double h = 0;    // task heuristic under the planner's model
  int parent = -1; // -1 marks the root
  int depth = 0;
  std::optional<ControlSegment> edge;  // joint-space control from the parent
};

class MotionTree {
 public:
  MotionTree(SystemState root, double h) {
    TreeNode n;
    n.state = std::move(root);
    n.h = h;
    nodes_.push_back(std::move(n));
    children_.push_back(0);
  }

  int add(int parent, SystemState state, double h, ControlSegment edge) {
    TreeNode n;
    n.state = std::move(state);
    n.h = h;
    n.parent = parent;
    n.depth = nodes_[static_cast<size_t>(parent)].depth + 1;
    n.edge = std::move(edge);
    max_depth_ = std::max(max_depth_, n.depth);
    ++children_[static_cast<size_t>(parent)];
    nodes_.push_back(std::move(n));
    children_.push_back(0);
    return static_cast<int>(nodes_.size()) - 1;
  }

  const TreeNode& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  int root() const { return 0; }
  int max_depth() const { return max_depth_; }
  bool is_leaf(int id) const { return children_[static_cast<size_t>(id)] == 0; }

  std::vector<ControlSegment> extract_controls(int id) const {
    std::vector<ControlSegment> out;
    for (int cur = id; cur != 0; cur = nodes_[static_cast<size_t>(cur)].parent)
      out.push_back(*nodes_[static_cast<size_t>(cur)].edge);
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  std::vector<TreeNode> nodes_;
  std::vector<int> children_;
  int max_depth_ = 0;
};

inline int nearest(const MotionTree& tree, const SystemState& q_rand,
                   const PlannerConfig& cfg) {
  int best = 0;
  double best_d = state_distance(tree.node(0).state, q_rand, cfg);
  for (int i = 1; i < tree.size(); ++i) {
    const double d = state_distance(tree.node(i).state, q_rand, cfg);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

// One expansion attempt: steer toward a random sample with the best of M
// simulated candidate pushes.  Candidates whose Jacobian projection fails or
// whose rollout ends invalid cannot win; if none survive, the tree is left
// unchanged.  Returns the new node id, or -1 for a fruitless attempt.
inline int expand_tree(MotionTree& tree, Rng& rng, const Scenario& sc,
                       const PlannerConfig& cfg, WorkMeter& meter) {
  std::optional<Vec2> focus;
  if (cfg.goal_bias > 0) focus = task_focus(sc, tree.node(tree.root()).state);
  const SystemState q_rand = sample_state(rng, sc, cfg, focus);
  const int near = nearest(tree, q_rand, cfg);

  std::vector<Twist> twists;
  twists.reserve(static_cast<size_t>(cfg.candidates));
  for (int i = 0; i < cfg.candidates; ++i)
    twists.push_back(Twist{rng.uniform(-cfg.max_linear_speed, cfg.max_linear_speed),
                           rng.uniform(-cfg.max_linear_speed, cfg.max_linear_speed),
                           rng.uniform(-cfg.max_angular_speed, cfg.max_angular_speed),
                           cfg.control_duration});

  SimOptions opts;
  opts.planner_view = true;
  opts.meter = &meter;
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  std::optional<TwistOutcome> winner;
  for (int i = 0; i < cfg.candidates; ++i) {
    TwistOutcome out =
        simulate_twist(sc, sc.arm, sc.physics, tree.node(near).state, twists[i], opts);
    if (!out.state.valid || !out.segment.has_value()) continue;
    const double d = state_distance(out.state, q_rand, cfg);
    if (d < best_d) {
      best_d = d;
      best = i;
      winner = std::move(out);
    }
  }
  if (best < 0) return -1;
  const double h = task_heuristic(winner->state, sc, /*planner_view=*/true);
  return tree.add(near, std::move(winner->state), h, std::move(*winner->segment));
}

enum class HorizonBranch { kNone, kGoal, kHorizon, kDepthLimit };

struct EvaluateResult {
  HorizonBranch branch = HorizonBranch::kNone;
  int node = -1;
  std::vector<ControlSegment> controls;
};

// The dynamic-horizon policy, applied after each expansion: hand a control
// prefix to the executor when the newest node reaches the goal region, when
// it improves the heuristic by more than the progress threshold, or -- once
// the tree hits the depth limit -- toward the most promising leaf.
inline EvaluateResult evaluate_progress(const MotionTree& tree, int q_new, double p,
                                        int max_depth, const Scenario& sc) {
  EvaluateResult r;
  if (goal_satisfied(tree.node(q_new).state, sc, /*planner_view=*/true)) {
    r.branch = HorizonBranch::kGoal;
    r.node = q_new;
  } else if (tree.node(tree.root()).h - tree.node(q_new).h > p) {
    r.branch = HorizonBranch::kHorizon;
    r.node = q_new;
  } else if (tree.max_depth() >= max_depth) {
    int best = -1;
    double best_h = std::numeric_limits<double>::infinity();
    for (int i = 0; i < tree.size(); ++i) {
      if (!tree.is_leaf(i)) continue;
      if (tree.node(i).h < best_h) {
        best_h = tree.node(i).h;
        best = i;
      }
    }
    r.branch = HorizonBranch::kDepthLimit;
    r.node = best;
  }
  if (r.node >= 0) r.controls = tree.extract_controls(r.node);
  return r;
}

// The executor runs joint-space segments in the real world (optionally
// perturbed or modelled with different shapes), halting before any segment
// whose outcome is invalid.  It reports the observed state and how many
// segments completed.
struct ExecutionFeedback {
  SystemState observed;
  size_t completed = 0;
};
using Executor =
    std::function<ExecutionFeedback(const SystemState&, const std::vector<ControlSegment>&)>;

enum class PlanEventKind { kNodeAdded, kSegmentEmitted, kReplanned, kGoalReached };

struct PlanEvent {
  PlanEventKind kind;
  HorizonBranch branch = HorizonBranch::kNone;  // segment-emitted only
  double h_root = 0;    // heuristic at the emitting tree's root / at the new root
  double h_target = 0;  // heuristic at the node whose path was emitted
  size_t segments = 0;  // length of the emitted sequence / completed count
};
using PlanEventSink = std::function<void(const PlanEvent&)>;

struct PlanOutcome {
  bool success = false;
  std::vector<ControlSegment> executed_controls;
  double planning_time = 0;  // simulated seconds spent planning (executor excluded)
  int nodes_added = 0;
  int replans = 0;
  int segments_executed = 0;
  SystemState final_state;
};

namespace detail {

inline void emit(const PlanEventSink& sink, PlanEvent ev) {
  if (sink) sink(ev);
}

inline bool observed_ok(const SystemState& q, const Scenario& sc) {
  return q.valid && is_valid(q, sc.arm, sc);
}

// Shared closed-loop driver.  grow() must expand the tree until it selects a
// control sequence or the budget runs dry.
template <typename Grow>
PlanOutcome plan_loop(const Scenario& sc, const PlannerConfig& cfg, const Executor& exec,
                      bool replanning, const PlanEventSink& sink, Grow&& grow) {
  validate(cfg);
  PlanOutcome out;
  WorkMeter meter;
  Rng rng(cfg.seed);

  SystemState q_obs = initial_state(sc);
  out.final_state = q_obs;
  if (!observed_ok(q_obs, sc)) return out;
  if (goal_satisfied(q_obs, sc)) {
    out.success = true;
    return out;
  }

  bool first_tree = true;
  while (true) {
    if (!first_tree) {
      ++out.replans;
      detail::emit(sink, PlanEvent{PlanEventKind::kReplanned, HorizonBranch::kNone,
                                   task_heuristic(q_obs, sc, /*planner_view=*/true), 0, 0});
    }
    MotionTree tree(q_obs, task_heuristic(q_obs, sc, /*planner_view=*/true));
    EvaluateResult ev = grow(tree, rng, meter, out);
    out.planning_time = meter.seconds;
    if (ev.branch == HorizonBranch::kNone) break;  // budget exhausted mid-tree

    detail::emit(sink, PlanEvent{PlanEventKind::kSegmentEmitted, ev.branch,
                                 tree.node(tree.root()).h, tree.node(ev.node).h,
                                 ev.controls.size()});
    const ExecutionFeedback fb = exec(q_obs, ev.controls);
    for (size_t i = 0; i < fb.completed && i < ev.controls.size(); ++i)
      out.executed_controls.push_back(ev.controls[i]);
    out.segments_executed = static_cast<int>(out.executed_controls.size());
    q_obs = fb.observed;
    out.final_state = q_obs;
    first_tree = false;

    if (!observed_ok(q_obs, sc)) break;
    if (goal_satisfied(q_obs, sc)) {
      out.success = true;
      detail::emit(sink, PlanEvent{PlanEventKind::kGoalReached, HorizonBranch::kNone,
                                   task_heuristic(q_obs, sc, /*planner_view=*/true), 0,
                                   fb.completed});
      break;
    }
    if (!replanning || meter.seconds >= cfg.time_budget) break;
  }
  out.planning_time = meter.seconds;
  return out;
}

}  // namespace detail

// Dynamic-horizon RRT: interleaves short planning horizons with execution,
// re-rooting a fresh tree at every observation until the goal holds in the
// executed world or the planning budget runs out.
inline PlanOutcome plan_dhrrt(const Scenario& sc, const PlannerConfig& cfg,
                              const Executor& exec, const PlanEventSink& sink = {}) {
  return detail::plan_loop(
      sc, cfg, exec, /*replanning=*/true, sink,
      [&](MotionTree& tree, Rng& rng, WorkMeter& meter, PlanOutcome& out) {
        EvaluateResult ev;
        while (meter.seconds < cfg.time_budget) {
          const int id = expand_tree(tree, rng, sc, cfg, meter);
          if (id < 0) continue;
          ++out.nodes_added;
          detail::emit(sink, PlanEvent{PlanEventKind::kNodeAdded, HorizonBranch::kNone,
                                       tree.node(tree.root()).h, tree.node(id).h, 0});
          ev = evaluate_progress(tree, id, cfg.progress_threshold, cfg.max_depth, sc);
          if (ev.branch != HorizonBranch::kNone) break;
        }
        return ev;
      });
}

// kdRRT baseline: one tree straight to the goal region, executed open-loop.
// With replanning enabled (r-kdRRT) a miss triggers a fresh tree from the
// observed state until the budget is exhausted.
inline PlanOutcome plan_kdrrt(const Scenario& sc, const PlannerConfig& cfg,
                              const Executor& exec, bool replanning,
                              const PlanEventSink& sink = {}) {
  return detail::plan_loop(
      sc, cfg, exec, replanning, sink,
      [&](MotionTree& tree, Rng& rng, WorkMeter& meter, PlanOutcome& out) {
        EvaluateResult ev;
        while (meter.seconds < cfg.time_budget) {
          const int id = expand_tree(tree, rng, sc, cfg, meter);
          if (id < 0) continue;
          ++out.nodes_added;
          detail::emit(sink, PlanEvent{PlanEventKind::kNodeAdded, HorizonBranch::kNone,
                                       tree.node(tree.root()).h, tree.node(id).h, 0});
          if (goal_satisfied(tree.node(id).state, sc, /*planner_view=*/true)) {
            ev.branch = HorizonBranch::kGoal;
            ev.node = id;
            ev.controls = tree.extract_controls(id);
            break;
          }
        }
        return ev;
      });
}

}  // namespace rearrange
