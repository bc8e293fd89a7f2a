#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "rearrange/scenario.hpp"
#include "rearrange/tasks.hpp"

namespace rearrange {
namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// world y points up; svg y points down
inline std::string svg_points(const std::vector<Vec2>& pts) {
  std::string out;
  for (const Vec2& p : pts) {
    if (!out.empty()) out += ' ';
    out += svg_num(p.x) + "," + svg_num(-p.y);
  }
  return out;
}

inline const char* class_color(int label) {
  static const char* palette[] = {"#4c72b0", "#c44e52", "#55a868", "#8172b2",
                                  "#ccb974", "#64b5cd"};
  return palette[static_cast<size_t>(label < 0 ? -label : label) % 6];
}

}  // namespace detail

/// Top-down scene rendering: workspace outline, obstacles in gray, movable
/// objects in their class colors (task target outlined), the gripper at the
/// state's end-effector pose, and an optional executed end-effector path.
inline std::string render_svg(const Scenario& sc, const SystemState& q,
                              const std::vector<Vec2>& ee_path = {}) {
  const Rect& w = sc.workspace;
  const double margin = 0.1 * std::max(w.width(), w.height());
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"";
  svg += detail::svg_num(w.min.x - margin) + " " + detail::svg_num(-w.max.y - margin) + " " +
         detail::svg_num(w.width() + 2 * margin) + " " + detail::svg_num(w.height() + 2 * margin);
  svg += "\">\n";
  svg += "<rect x=\"" + detail::svg_num(w.min.x) + "\" y=\"" + detail::svg_num(-w.max.y) +
         "\" width=\"" + detail::svg_num(w.width()) + "\" height=\"" +
         detail::svg_num(w.height()) +
         "\" fill=\"#fafafa\" stroke=\"#333333\" stroke-width=\"0.01\"/>\n";

  for (const auto& [shape, pose] : sc.obstacles)
    svg += "<polygon points=\"" + detail::svg_points(world_vertices(shape, pose)) +
           "\" fill=\"#9e9e9e\" stroke=\"#616161\" stroke-width=\"0.005\"/>\n";

  size_t target = sc.objects.size();  // out of range = no highlighted target
  if (const auto* g = std::get_if<GraspTask>(&sc.task)) target = g->target_index;
  if (const auto* r = std::get_if<RelocateTask>(&sc.task)) {
    target = r->target_index;
    svg += "<circle cx=\"" + detail::svg_num(r->goal_center.x) + "\" cy=\"" +
           detail::svg_num(-r->goal_center.y) + "\" r=\"" + detail::svg_num(r->goal_radius) +
           "\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"0.008\" stroke-dasharray=\"0.02 0.02\"/>\n";
  }
  for (size_t i = 0; i < sc.objects.size(); ++i) {
    const bool hot = i == target;
    svg += "<polygon points=\"" +
           detail::svg_points(world_vertices(sc.objects[i].shape, q.objects[i])) +
           "\" fill=\"" + detail::class_color(sc.objects[i].class_label) + "\" stroke=\"" +
           (hot ? "#d62728" : "#212121") + "\" stroke-width=\"" + (hot ? "0.012" : "0.004") +
           "\"/>\n";
  }

  if (ee_path.size() > 1)
    svg += "<polyline points=\"" + detail::svg_points(ee_path) +
           "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"0.006\"/>\n";

  for (const auto& [shape, local] : sc.gripper.bodies()) {
    const auto pts = world_vertices(shape, compose(q.ee, local));
    std::string d;
    for (size_t i = 0; i < pts.size(); ++i)
      d += (i == 0 ? "M" : "L") + detail::svg_num(pts[i].x) + " " + detail::svg_num(-pts[i].y);
    d += "Z";
    svg += "<path d=\"" + d + "\" fill=\"#37474f\" stroke=\"#111111\" stroke-width=\"0.004\"/>\n";
  }

  svg += "</svg>\n";
  return svg;
}

}  // namespace rearrange
