#include "rearrange/experiment.hpp"
#include "rearrange/svg.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace rearrange {
namespace {

namespace fs = std::filesystem;

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = testing::TempDir() + name;
  std::ofstream out(path);
  out << content;
  return path;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Same geometry as the planner fixture: short reach to a one-push relocation.
const char* kMiniRelocate = R"({
  "name": "mini_relocate",
  "workspace": {"min": [-0.55, -0.4], "max": [0.12, 0.3]},
  "arm": {"base": [-1.4, 0.0, 0.0], "links": [0.5, 0.5, 0.5]},
  "start_joints": [-0.9, 1.5, -0.6],
  "objects": [
    {"shape": {"type": "box", "width": 0.05, "height": 0.05}, "pose": [-0.0765, -0.1094, 0.0]}
  ],
  "task": {"type": "relocate", "target": 0, "goal": [0.0735, -0.1094], "radius": 0.1}
})";

const char* kMiniGrasp = R"({
  "name": "mini_grasp",
  "workspace": {"min": [-0.55, -0.4], "max": [0.12, 0.3]},
  "arm": {"base": [-1.4, 0.0, 0.0], "links": [0.5, 0.5, 0.5]},
  "start_joints": [-0.9, 1.5, -0.6],
  "objects": [
    {"shape": {"type": "regular", "sides": 6, "radius": 0.03}, "pose": [-0.0765, -0.1094, 0.0]}
  ],
  "task": {"type": "grasp", "target": 0}
})";

TEST(ScenarioIoTest, RoundTripIsStable) {
  const std::string path = write_temp("mini_relocate.json", kMiniRelocate);
  const Scenario sc = load_scenario(path);
  EXPECT_EQ(sc.name, "mini_relocate");
  EXPECT_EQ(sc.object_count(), 1u);
  ASSERT_TRUE(std::holds_alternative<RelocateTask>(sc.task));

  const std::string saved = testing::TempDir() + "mini_relocate_saved.json";
  save_scenario(sc, saved);
  const Scenario sc2 = load_scenario(saved);
  const std::string saved2 = testing::TempDir() + "mini_relocate_saved2.json";
  save_scenario(sc2, saved2);
  EXPECT_EQ(read_file(saved), read_file(saved2));
  EXPECT_TRUE(initial_state(sc) == initial_state(sc2));
}

TEST(ScenarioIoTest, PolygonShapesRecenterWithoutMovingWorldGeometry) {
  // off-center triangle: the loader must shift the pose, not the world shape
  const char* doc = R"({
    "name": "offcenter",
    "workspace": {"min": [-1, -1], "max": [1, 1]},
    "arm": {"base": [-1.4, 0.0, 0.0], "links": [0.5, 0.5, 0.5]},
    "start_joints": [-0.9, 1.5, -0.6],
    "objects": [
      {"shape": {"type": "polygon", "vertices": [[0.5, 0.5], [0.62, 0.5], [0.56, 0.61]]},
       "pose": [0.0, 0.0, 0.0]}
    ],
    "task": {"type": "relocate", "target": 0, "goal": [0.8, 0.8], "radius": 0.1}
  })";
  const Scenario sc = load_scenario(write_temp("offcenter.json", doc));
  const auto verts = world_vertices(sc.objects[0].shape, sc.objects[0].start);
  // original vertices recovered in world coordinates, in order
  EXPECT_NEAR(verts[0].x, 0.5, 1e-12);
  EXPECT_NEAR(verts[0].y, 0.5, 1e-12);
  EXPECT_NEAR(verts[1].x, 0.62, 1e-12);
  EXPECT_NEAR(verts[2].y, 0.61, 1e-12);
  // and the stored shape is centroid-centered
  const Vec2 c = polygon_centroid(sc.objects[0].shape.vertices);
  EXPECT_NEAR(c.x, 0.0, 1e-12);
  EXPECT_NEAR(c.y, 0.0, 1e-12);
}

TEST(ScenarioIoTest, RejectsObjectOutsideWorkspace) {
  std::string doc = kMiniRelocate;
  const auto at = doc.find("[-0.0765, -0.1094, 0.0]");
  ASSERT_NE(at, std::string::npos);
  doc.replace(at, std::string("[-0.0765, -0.1094, 0.0]").size(), "[2.5, 0.0, 0.0]");
  const std::string path = write_temp("outside.json", doc);
  try {
    load_scenario(path);
    FAIL() << "expected a validation error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("outside the workspace"), std::string::npos);
  }
}

TEST(ScenarioIoTest, RejectsUngraspableTarget) {
  std::string doc = kMiniGrasp;
  const auto at = doc.find("\"sides\": 6");
  ASSERT_NE(at, std::string::npos);
  doc.replace(at, std::string("\"sides\": 6").size(), "\"sides\": 3");  // no parallel edges
  try {
    load_scenario(write_temp("ungraspable.json", doc));
    FAIL() << "expected a validation error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("feasible antipodal grasp"), std::string::npos);
  }
}

TEST(ScenarioIoTest, RejectsBadIndexAndBadParse) {
  std::string doc = kMiniRelocate;
  const auto at = doc.find("\"target\": 0");
  doc.replace(at, std::string("\"target\": 0").size(), "\"target\": 3");
  EXPECT_THROW(load_scenario(write_temp("badindex.json", doc)), std::runtime_error);
  EXPECT_THROW(load_scenario(write_temp("badparse.json", "{not json")), std::runtime_error);
  EXPECT_THROW(load_scenario(testing::TempDir() + "does_not_exist.json"), std::runtime_error);
}

TEST(ScenarioIoTest, ReductionShrinksPlannerModelOnly) {
  Scenario sc = load_scenario(write_temp("mini_grasp.json", kMiniGrasp));
  ASSERT_FALSE(sc.planner_model_override.has_value());
  apply_reduction(sc, 0.33);
  ASSERT_TRUE(sc.planner_model_override.has_value());
  EXPECT_EQ(sc.objects[0].shape.vertices.size(), 6u);  // executor model untouched
  EXPECT_LT(sc.planner_shape(0).vertices.size(), 6u);
  EXPECT_GE(sc.planner_shape(0).vertices.size(), 3u);
  EXPECT_THROW(apply_reduction(sc, 0.0), std::runtime_error);
  EXPECT_THROW(apply_reduction(sc, 1.5), std::runtime_error);
}

TEST(ExecutorTest, MatchesPlainReplayWithoutPerturbation) {
  const Scenario sc = load_scenario(write_temp("mini_relocate.json", kMiniRelocate));
  PlannerConfig cfg = default_planner_config(sc);
  cfg.seed = 3;
  cfg.time_budget = 20.0;
  WorkMeter meter;
  Rng rng(cfg.seed);
  const SystemState start = initial_state(sc);
  MotionTree tree(start, task_heuristic(start, sc, true));
  for (int i = 0; i < 30; ++i) expand_tree(tree, rng, sc, cfg, meter);
  ASSERT_GT(tree.size(), 3);
  const auto controls = tree.extract_controls(tree.size() - 1);

  const Executor exec = make_sim_executor(sc, std::nullopt, Rng(9));
  const ExecutionFeedback fb = exec(start, controls);
  EXPECT_EQ(fb.completed, controls.size());

  SystemState manual = start;
  for (const auto& seg : controls) manual = simulate_segment(sc, sc.arm, sc.physics, manual, seg);
  EXPECT_TRUE(fb.observed == manual);
}

TEST(ExecutorTest, KicksArriveOnTheExecutionClock) {
  const Scenario sc = load_scenario(write_temp("mini_relocate.json", kMiniRelocate));
  const SystemState start = initial_state(sc);
  // idle segments far from the object: any motion must come from kicks
  ControlSegment idle;
  idle.source_twist = Twist{0, 0, 0, 0.2};
  idle.samples.assign(20, {std::vector<double>(3, 0.0), 0.01});
  const std::vector<ControlSegment> controls(5, idle);  // 1.0 s of execution

  PerturbSpec kick;
  kick.interval = 0.45;  // crossings at 0.45 and 0.90 -> exactly two kicks
  kick.speed = 0.4;
  const Executor exec = make_sim_executor(sc, kick, Rng(21));
  const ExecutionFeedback fb = exec(start, controls);
  ASSERT_EQ(fb.completed, 5u);
  const double moved = std::hypot(fb.observed.objects[0].x - start.objects[0].x,
                                  fb.observed.objects[0].y - start.objects[0].y);
  EXPECT_GT(moved, 0.0);
  EXPECT_LE(moved, 2 * 0.04 + 1e-9);  // at most two 0.04 m kicks

  // replaying with the same seed reproduces the kicks exactly
  const Executor exec2 = make_sim_executor(sc, kick, Rng(21));
  EXPECT_TRUE(exec2(start, controls).observed == fb.observed);
}

TEST(MetricsTest, AggregationRules) {
  const Scenario sc = load_scenario(write_temp("mini_relocate.json", kMiniRelocate));
  const auto& task = std::get<RelocateTask>(sc.task);
  SystemState at_goal = initial_state(sc);
  at_goal.objects[0] = Pose2{task.goal_center.x, task.goal_center.y, 0};
  const SystemState far = initial_state(sc);

  std::vector<TrialRecord> records;
  for (int i = 1; i <= 9; ++i) {
    TrialRecord r;
    r.trial = i - 1;
    r.success = true;
    r.planning_time = i;
    r.nodes_added = 10;
    r.final_state = at_goal;
    records.push_back(r);
  }
  TrialRecord fail;
  fail.trial = 9;
  fail.success = false;
  fail.planning_time = 7;
  fail.nodes_added = 10;
  fail.final_state = far;
  records.push_back(fail);

  const BatchSummary s = summarize(records, sc);
  EXPECT_EQ(s.trials, 10);
  EXPECT_EQ(s.successes, 9);
  EXPECT_DOUBLE_EQ(s.success_rate, 0.9);
  EXPECT_DOUBLE_EQ(s.time_mean, 5.0);                  // mean of 1..9
  EXPECT_NEAR(s.time_std, std::sqrt(60.0 / 9), 1e-12); // population std over successes
  EXPECT_DOUBLE_EQ(s.nodes_per_s, 100.0 / 52.0);       // all trials count

  records[0].success = false;  // now lies about its final state
  EXPECT_THROW(summarize(records, sc), std::logic_error);
}

TEST(ExperimentTest, ReproducibleByteIdenticalCsv) {
  const Scenario sc = load_scenario(write_temp("mini_relocate.json", kMiniRelocate));
  ExperimentSpec spec;
  spec.planner = PlannerKind::kDhrrt;
  spec.trials = 3;
  spec.seed_base = 42;
  spec.time_budget = 10.0;
  spec.perturb = PerturbSpec{0.5, 0.4, 0.1};
  spec.config = default_planner_config(sc);

  const BatchResult a = run_experiment(sc, spec);
  const BatchResult b = run_experiment(sc, spec);
  EXPECT_EQ(to_csv(a.records), to_csv(b.records));
  EXPECT_EQ(a.summary.successes, b.summary.successes);

  const std::string csv = to_csv(a.records);
  EXPECT_EQ(csv.rfind("trial,planner,seed,success,planning_time_s,nodes_added,nodes_per_s,"
                      "replans,segments_executed\n", 0), 0u);
  EXPECT_EQ(static_cast<int>(std::count(csv.begin(), csv.end(), '\n')), spec.trials + 1);
}

TEST(ExperimentTest, PerturbationIncreasesReplans) {
  const Scenario sc = load_scenario(write_temp("mini_relocate.json", kMiniRelocate));
  ExperimentSpec clean;
  clean.planner = PlannerKind::kDhrrt;
  clean.trials = 20;
  clean.seed_base = 7;
  clean.time_budget = 20.0;
  clean.config = default_planner_config(sc);
  ExperimentSpec noisy = clean;
  noisy.perturb = PerturbSpec{0.5, 0.4, 0.1};

  const BatchResult a = run_experiment(sc, clean);
  const BatchResult b = run_experiment(sc, noisy);
  long long clean_replans = 0, noisy_replans = 0;
  for (const auto& r : a.records) clean_replans += r.replans;
  for (const auto& r : b.records) noisy_replans += r.replans;
  EXPECT_GT(noisy_replans, clean_replans);

  // budget compliance: overshoot bounded by a single expansion
  for (const auto& r : a.records) EXPECT_LE(r.planning_time, clean.time_budget + 0.1);
  for (const auto& r : b.records) EXPECT_LE(r.planning_time, clean.time_budget + 0.1);
}

TEST(ExperimentTest, TraceReplayReproducesFinalState) {
  const Scenario sc = load_scenario(write_temp("mini_relocate.json", kMiniRelocate));
  ExperimentSpec spec;
  spec.planner = PlannerKind::kDhrrt;
  spec.trials = 1;
  spec.seed_base = 5;
  spec.time_budget = 20.0;
  spec.config = default_planner_config(sc);

  std::vector<std::string> lines;
  const auto sink = [&](const TraceRecord& r) { lines.push_back(trace_to_line(r)); };
  PlannerConfig cfg = spec.config;
  cfg.time_budget = spec.time_budget;
  cfg.seed = Rng::derive(spec.seed_base, 0, 0).raw();
  const PlanOutcome out =
      plan_dhrrt(sc, cfg, make_sim_executor(sc, std::nullopt, Rng::derive(spec.seed_base, 1, 0),
                                            sink));
  ASSERT_TRUE(out.success);
  ASSERT_FALSE(lines.empty());

  // parse back and compare against an independent replay of the controls
  const TraceRecord last = trace_from_line(lines.back());
  SystemState replay = initial_state(sc);
  for (const auto& seg : out.executed_controls)
    replay = simulate_segment(sc, sc.arm, sc.physics, replay, seg);
  ASSERT_EQ(last.objects.size(), replay.objects.size());
  for (size_t i = 0; i < last.objects.size(); ++i)
    EXPECT_TRUE(last.objects[i] == replay.objects[i]);
  EXPECT_TRUE(last.joints == replay.joints);
  EXPECT_EQ(static_cast<int>(lines.size()),
            static_cast<int>(out.executed_controls.size()) * 20);

  const std::string path = write_temp("trial0.trace.jsonl", [&] {
    std::string all;
    for (const auto& l : lines) all += l + "\n";
    return all;
  }());
  const auto records = load_trace(path);
  ASSERT_EQ(records.size(), lines.size());
  EXPECT_TRUE(records.back().joints == replay.joints);
}

TEST(SvgTest, CountsAndDecorations) {
  const char* doc = R"({
    "name": "svg_scene",
    "workspace": {"min": [-0.55, -0.4], "max": [0.12, 0.3]},
    "arm": {"base": [-1.4, 0.0, 0.0], "links": [0.5, 0.5, 0.5]},
    "start_joints": [-0.9, 1.5, -0.6],
    "obstacles": [
      {"shape": {"type": "box", "width": 0.1, "height": 0.3}, "pose": [-0.4, 0.2, 0.2]}
    ],
    "objects": [
      {"shape": {"type": "box", "width": 0.05, "height": 0.05}, "pose": [-0.0765, -0.1094, 0.0]},
      {"shape": {"type": "regular", "sides": 6, "radius": 0.03}, "pose": [-0.25, 0.0, 0.0], "class": 1}
    ],
    "task": {"type": "relocate", "target": 0, "goal": [0.0735, -0.1094], "radius": 0.1}
  })";
  const Scenario sc = load_scenario(write_temp("svg_scene.json", doc));
  const std::string svg = render_svg(sc, initial_state(sc), {{0, 0}, {0.1, 0.05}});

  size_t polygons = 0;
  for (size_t at = svg.find("<polygon"); at != std::string::npos;
       at = svg.find("<polygon", at + 1))
    ++polygons;
  EXPECT_EQ(polygons, sc.objects.size() + sc.obstacles.size());
  EXPECT_NE(svg.find("<svg "), std::string::npos);
  EXPECT_NE(svg.find("<circle"), std::string::npos);    // relocation goal disc
  EXPECT_NE(svg.find("<polyline"), std::string::npos);  // executed path
  EXPECT_EQ(svg.find("nan"), std::string::npos);
}

TEST(ShippedScenariosTest, AllLoadAndValidate) {
  const char* dir = std::getenv("REARRANGE_SCENARIO_DIR");
  if (dir == nullptr) GTEST_SKIP() << "REARRANGE_SCENARIO_DIR not set";
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    ++seen;
    EXPECT_NO_THROW({
      const Scenario sc = load_scenario(entry.path().string());
      EXPECT_TRUE(is_valid(initial_state(sc), sc.arm, sc)) << entry.path();
    }) << entry.path();
  }
  EXPECT_GE(seen, 5);  // the default library ships at least five scenes
}

}  // namespace
}  // namespace rearrange
