#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "rearrange/physics.hpp"
#include "rearrange/tasks.hpp"

namespace rearrange {

using Json = nlohmann::ordered_json;

namespace detail {

[[noreturn]] inline void io_fail(const std::string& context, const std::string& what) {
  throw std::runtime_error(context + ": " + what);
}

inline const Json& field(const Json& j, const char* key, const std::string& context) {
  const auto it = j.find(key);
  if (it == j.end()) io_fail(context, std::string("missing field '") + key + "'");
  return *it;
}

inline Vec2 read_vec2(const Json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 2) io_fail(context, "expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Pose2 read_pose(const Json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 3) io_fail(context, "expected [x, y, theta]");
  return Pose2{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json write_pose(const Pose2& p) { return Json::array({p.x, p.y, p.theta}); }

// A shape is {"type": "box"|"regular"|"polygon", ...}.  Explicit polygons are
// re-centered on their centroid; the accompanying pose is shifted so the
// world-frame geometry is preserved.
inline ConvexPolygon read_shape(const Json& j, Pose2& pose, const std::string& context) {
  const std::string type = field(j, "type", context).get<std::string>();
  try {
    if (type == "box")
      return ConvexPolygon::box(field(j, "width", context).get<double>(),
                                field(j, "height", context).get<double>());
    if (type == "regular")
      return ConvexPolygon::regular(field(j, "sides", context).get<int>(),
                                    field(j, "radius", context).get<double>());
    if (type == "polygon") {
      std::vector<Vec2> pts;
      for (const Json& v : field(j, "vertices", context)) pts.push_back(read_vec2(v, context));
      const Vec2 c = polygon_centroid(pts);
      const Vec2 shifted = pose.transform(c);
      pose = Pose2{shifted.x, shifted.y, pose.theta};
      return ConvexPolygon::create(std::move(pts));
    }
  } catch (const std::invalid_argument& e) {
    io_fail(context, e.what());
  }
  io_fail(context, "unknown shape type '" + type + "'");
}

inline Json write_shape(const ConvexPolygon& shape) {
  Json verts = Json::array();
  for (const Vec2& v : shape.vertices) verts.push_back(Json::array({v.x, v.y}));
  return Json{{"type", "polygon"}, {"vertices", std::move(verts)}};
}

inline TaskSpec read_task(const Json& j, size_t object_count, const std::string& context) {
  const std::string type = field(j, "type", context).get<std::string>();
  const auto target_of = [&](const char* key) {
    const auto idx = field(j, key, context).get<long long>();
    if (idx < 0 || static_cast<size_t>(idx) >= object_count)
      io_fail(context, std::string(key) + " out of range");
    return static_cast<size_t>(idx);
  };
  if (type == "grasp") {
    GraspTask t;
    t.target_index = target_of("target");
    if (j.contains("eps_alpha")) t.eps_alpha = j["eps_alpha"].get<double>();
    if (j.contains("w_d")) t.w_d = j["w_d"].get<double>();
    if (j.contains("w_alpha")) t.w_alpha = j["w_alpha"].get<double>();
    return t;
  }
  if (type == "relocate") {
    RelocateTask t;
    t.target_index = target_of("target");
    t.goal_center = read_vec2(field(j, "goal", context), context + ".goal");
    if (j.contains("radius")) t.goal_radius = j["radius"].get<double>();
    if (!(t.goal_radius > 0)) io_fail(context, "goal radius must be positive");
    return t;
  }
  if (type == "sort") {
    SortTask t;  // class_of is filled from the object labels after loading
    if (j.contains("eps_d")) t.eps_d = j["eps_d"].get<double>();
    if (j.contains("lambda_sep")) t.lambda_sep = j["lambda_sep"].get<double>();
    if (j.contains("sep_cap")) t.sep_cap = j["sep_cap"].get<double>();
    if (!(t.eps_d > 0)) io_fail(context, "eps_d must be positive");
    return t;
  }
  io_fail(context, "unknown task type '" + type + "'");
}

}  // namespace detail

inline Scenario scenario_from_json(const Json& j, const std::string& context) {
  using detail::field;
  using detail::io_fail;
  Scenario sc;
  sc.name = field(j, "name", context).get<std::string>();
  {
    const Json& w = field(j, "workspace", context);
    sc.workspace.min = detail::read_vec2(field(w, "min", context), context + ".workspace.min");
    sc.workspace.max = detail::read_vec2(field(w, "max", context), context + ".workspace.max");
    if (!(sc.workspace.min.x < sc.workspace.max.x && sc.workspace.min.y < sc.workspace.max.y))
      io_fail(context, "workspace min must be strictly below max");
  }
  {
    const Json& a = field(j, "arm", context);
    const Pose2 base = detail::read_pose(field(a, "base", context), context + ".arm.base");
    std::vector<double> links;
    for (const Json& l : field(a, "links", context)) links.push_back(l.get<double>());
    double limit = 2.8;
    if (a.contains("joint_limit")) limit = a["joint_limit"].get<double>();
    try {
      sc.arm = ArmModel::make(base, std::move(links), limit);
    } catch (const std::invalid_argument& e) {
      io_fail(context + ".arm", e.what());
    }
    if (a.contains("link_width")) sc.arm.link_width = a["link_width"].get<double>();
    if (a.contains("manipulability_threshold"))
      sc.arm.manipulability_threshold = a["manipulability_threshold"].get<double>();
  }
  for (const Json& v : field(j, "start_joints", context))
    sc.start_joints.angles.push_back(v.get<double>());
  if (sc.start_joints.angles.size() != sc.arm.dof())
    io_fail(context, "start_joints length does not match the arm's joint count");

  if (j.contains("gripper")) {
    const Json& g = j["gripper"];
    if (g.contains("finger_gap")) sc.gripper.finger_gap = g["finger_gap"].get<double>();
    if (g.contains("finger_depth")) sc.gripper.finger_depth = g["finger_depth"].get<double>();
    if (g.contains("finger_width")) sc.gripper.finger_width = g["finger_width"].get<double>();
    if (g.contains("palm_thickness"))
      sc.gripper.palm_thickness = g["palm_thickness"].get<double>();
  }
  if (j.contains("physics")) {
    const Json& p = j["physics"];
    if (p.contains("substep")) sc.physics.substep = p["substep"].get<double>();
    if (p.contains("max_resolution_iters"))
      sc.physics.max_resolution_iters = p["max_resolution_iters"].get<int>();
    if (p.contains("rotation_coupling"))
      sc.physics.rotation_coupling = p["rotation_coupling"].get<double>();
    if (p.contains("contact_tolerance"))
      sc.physics.contact_tolerance = p["contact_tolerance"].get<double>();
    if (!(sc.physics.substep > 0) || sc.physics.max_resolution_iters < 1 ||
        !(sc.physics.contact_tolerance > 0))
      io_fail(context + ".physics", "invalid physics parameters");
  }

  if (j.contains("obstacles")) {
    size_t i = 0;
    for (const Json& o : j["obstacles"]) {
      const std::string ctx = context + ".obstacles[" + std::to_string(i++) + "]";
      Pose2 pose = detail::read_pose(field(o, "pose", ctx), ctx + ".pose");
      ConvexPolygon shape = detail::read_shape(field(o, "shape", ctx), pose, ctx + ".shape");
      sc.obstacles.emplace_back(std::move(shape), pose);
    }
  }

  size_t i = 0;
  for (const Json& o : field(j, "objects", context)) {
    const std::string ctx = context + ".objects[" + std::to_string(i++) + "]";
    ObjectSpec spec;
    Pose2 pose = detail::read_pose(field(o, "pose", ctx), ctx + ".pose");
    spec.shape = detail::read_shape(field(o, "shape", ctx), pose, ctx + ".shape");
    spec.start = pose;
    if (o.contains("class")) spec.class_label = o["class"].get<int>();
    sc.objects.push_back(std::move(spec));
  }
  if (sc.objects.empty()) io_fail(context, "at least one movable object is required");

  sc.task = detail::read_task(field(j, "task", context), sc.objects.size(), context + ".task");
  if (auto* sort = std::get_if<SortTask>(&sc.task)) {
    sort->class_of.clear();
    for (const ObjectSpec& o : sc.objects) sort->class_of.push_back(o.class_label);
  }
  if (auto* grasp = std::get_if<GraspTask>(&sc.task)) {
    // approach angles derive from the true target geometry, so a reduced
    // planner model can never erase graspability
    grasp->base_angles =
        feasible_grasp_angles(sc.objects[grasp->target_index].shape, sc.gripper);
    if (grasp->base_angles.empty())
      io_fail(context, "grasp target has no feasible antipodal grasp for this gripper");
  }

  for (size_t k = 0; k < sc.objects.size(); ++k)
    if (!sc.workspace.contains({sc.objects[k].start.x, sc.objects[k].start.y}))
      io_fail(context, "objects[" + std::to_string(k) + "] starts outside the workspace");
  if (!is_valid(initial_state(sc), sc.arm, sc))
    io_fail(context, "initial state is invalid (penetration or workspace violation)");
  return sc;
}

inline Json scenario_to_json(const Scenario& sc) {
  Json j;
  j["name"] = sc.name;
  j["workspace"] = Json{{"min", Json::array({sc.workspace.min.x, sc.workspace.min.y})},
                        {"max", Json::array({sc.workspace.max.x, sc.workspace.max.y})}};
  Json arm;
  arm["base"] = detail::write_pose(sc.arm.base_pose);
  arm["links"] = sc.arm.link_lengths;
  arm["joint_limit"] = sc.arm.joint_limits.empty() ? 2.8 : sc.arm.joint_limits[0].second;
  arm["link_width"] = sc.arm.link_width;
  arm["manipulability_threshold"] = sc.arm.manipulability_threshold;
  j["arm"] = std::move(arm);
  j["start_joints"] = sc.start_joints.angles;
  j["gripper"] = Json{{"finger_gap", sc.gripper.finger_gap},
                      {"finger_depth", sc.gripper.finger_depth},
                      {"finger_width", sc.gripper.finger_width},
                      {"palm_thickness", sc.gripper.palm_thickness}};
  j["physics"] = Json{{"substep", sc.physics.substep},
                      {"max_resolution_iters", sc.physics.max_resolution_iters},
                      {"rotation_coupling", sc.physics.rotation_coupling},
                      {"contact_tolerance", sc.physics.contact_tolerance}};
  j["obstacles"] = Json::array();
  for (const auto& [shape, pose] : sc.obstacles)
    j["obstacles"].push_back(
        Json{{"shape", detail::write_shape(shape)}, {"pose", detail::write_pose(pose)}});
  j["objects"] = Json::array();
  for (const ObjectSpec& o : sc.objects)
    j["objects"].push_back(Json{{"shape", detail::write_shape(o.shape)},
                                {"pose", detail::write_pose(o.start)},
                                {"class", o.class_label}});
  j["task"] = std::visit(
      [](const auto& task) -> Json {
        using T = std::decay_t<decltype(task)>;
        if constexpr (std::is_same_v<T, GraspTask>) {
          return Json{{"type", "grasp"},
                      {"target", task.target_index},
                      {"eps_alpha", task.eps_alpha},
                      {"w_d", task.w_d},
                      {"w_alpha", task.w_alpha}};
        } else if constexpr (std::is_same_v<T, RelocateTask>) {
          return Json{{"type", "relocate"},
                      {"target", task.target_index},
                      {"goal", Json::array({task.goal_center.x, task.goal_center.y})},
                      {"radius", task.goal_radius}};
        } else {
          return Json{{"type", "sort"},
                      {"eps_d", task.eps_d},
                      {"lambda_sep", task.lambda_sep},
                      {"sep_cap", task.sep_cap}};
        }
      },
      sc.task);
  return j;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::io_fail(path, "cannot open file");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    detail::io_fail(path, e.what());
  }
  return scenario_from_json(j, path);
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out(path);
  if (!out) detail::io_fail(path, "cannot open file for writing");
  out << scenario_to_json(sc).dump(2) << "\n";
  if (!out) detail::io_fail(path, "write failed");
}

/// Installs a decimated planner model: each object shape keeps roughly
/// rate * n vertices (never fewer than 3).  The executor keeps true shapes.
inline void apply_reduction(Scenario& sc, double rate) {
  if (!(rate > 0 && rate <= 1)) detail::io_fail("reduce_rate", "must lie in (0, 1]");
  std::vector<ConvexPolygon> reduced;
  reduced.reserve(sc.objects.size());
  for (const ObjectSpec& o : sc.objects) reduced.push_back(simplify(o.shape, rate));
  sc.planner_model_override = std::move(reduced);
}

// ---- execution traces: one JSON object per line, lossless doubles ----

inline std::string trace_to_line(const TraceRecord& r) {
  Json j;
  j["t"] = r.t;
  j["joints"] = r.joints.angles;
  j["ee"] = detail::write_pose(r.ee);
  j["objects"] = Json::array();
  for (const Pose2& p : r.objects) j["objects"].push_back(detail::write_pose(p));
  j["contacts"] = Json::array();
  for (const auto& [a, b] : r.contacts) j["contacts"].push_back(Json::array({a, b}));
  return j.dump();
}

inline TraceRecord trace_from_line(const std::string& line) {
  const Json j = Json::parse(line);
  TraceRecord r;
  r.t = j.at("t").get<double>();
  r.joints.angles = j.at("joints").get<std::vector<double>>();
  r.ee = detail::read_pose(j.at("ee"), "trace.ee");
  for (const Json& p : j.at("objects")) r.objects.push_back(detail::read_pose(p, "trace.objects"));
  for (const Json& c : j.at("contacts"))
    r.contacts.emplace_back(c[0].get<int>(), c[1].get<int>());
  return r;
}

inline std::vector<TraceRecord> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::io_fail(path, "cannot open file");
  std::vector<TraceRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(trace_from_line(line));
    } catch (const Json::exception& e) {
      detail::io_fail(path + ":" + std::to_string(out.size() + 1), e.what());
    }
  }
  return out;
}

}  // namespace rearrange
