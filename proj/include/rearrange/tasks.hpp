#pragma once

#include <algorithm>
#include <map>

#include "rearrange/scenario.hpp"

namespace rearrange {

/// Feasible approach angles for a parallel-jaw grasp of a convex target at
/// orientation 0: every antipodal pair of parallel edges (within 1e-6 rad)
/// whose face separation fits inside the finger opening contributes the two
/// approach directions running along those edges. Empty means the target is
/// ungraspable with this gripper.
inline std::vector<double> feasible_grasp_angles(const ConvexPolygon& target,
                                                 const GripperGeometry& gripper) {
  std::vector<double> angles;
  const auto& v = target.vertices;
  const size_t n = v.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec2 ni = Vec2{(v[(i + 1) % n] - v[i]).y, -(v[(i + 1) % n] - v[i]).x}.normalized();
    for (size_t j = i + 1; j < n; ++j) {
      const Vec2 nj = Vec2{(v[(j + 1) % n] - v[j]).y, -(v[(j + 1) % n] - v[j]).x}.normalized();
      // antiparallel outward normals -> antipodal parallel faces
      const double deviation = std::atan2(std::abs(ni.cross(nj)), -ni.dot(nj));
      if (deviation > 1e-6) continue;
      const double width = std::abs((v[j] - v[i]).dot(ni));
      if (width >= gripper.finger_gap) continue;
      const double phi = std::atan2(ni.y, ni.x);
      angles.push_back(wrap_angle(phi + kPi / 2));
      angles.push_back(wrap_angle(phi - kPi / 2));
    }
  }
  std::sort(angles.begin(), angles.end());
  angles.erase(std::unique(angles.begin(), angles.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-9; }),
               angles.end());
  return angles;
}

// ----------------------------------------------------------------- grasping

inline bool grasp_goal(const SystemState& q, const GraspTask& task, const Scenario& s) {
  const Pose2 ee = gripper_pose(s, q);
  const Pose2& obj = q.objects[task.target_index];
  if (!s.gripper.finger_region().contains(ee.inverse_transform({obj.x, obj.y}))) return false;
  double best = std::numeric_limits<double>::infinity();
  for (double base : task.base_angles)
    best = std::min(best, angular_distance(ee.theta, base + obj.theta));
  return best <= task.eps_alpha;
}

/// h_g: weighted gripper-to-target distance plus misalignment of the gripper
/// heading with the direction toward the target. atan2(0,0) := 0 removes the
/// coincident-pose singularity.
inline double grasp_heuristic(const SystemState& q, const GraspTask& task, const Scenario& s) {
  const Pose2 ee = gripper_pose(s, q);
  const Pose2& obj = q.objects[task.target_index];
  const double dx = obj.x - ee.x, dy = obj.y - ee.y;
  const double dist = std::sqrt(dx * dx + dy * dy);
  const double bearing = dist == 0.0 ? 0.0 : std::atan2(dy, dx);
  return task.w_d * dist + task.w_alpha * angular_distance(ee.theta, bearing);
}

// --------------------------------------------------------------- relocating

inline bool relocate_goal(const SystemState& q, const RelocateTask& task) {
  const Pose2& obj = q.objects[task.target_index];
  return (Vec2{obj.x, obj.y} - task.goal_center).norm() <= task.goal_radius;
}

/// h_r: distance target-to-gripper plus distance target-to-goal-center.
inline double relocate_heuristic(const SystemState& q, const RelocateTask& task,
                                 const Scenario& s) {
  const Pose2 ee = gripper_pose(s, q);
  const Pose2& obj = q.objects[task.target_index];
  const Vec2 target{obj.x, obj.y};
  return (target - Vec2{ee.x, ee.y}).norm() + (target - task.goal_center).norm();
}

// ------------------------------------------------------------------ sorting

namespace detail {

inline std::vector<int> sorted_labels(const SortTask& task) {
  std::vector<int> labels = task.class_of;
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

// Convex hull of all member objects' world vertices, one per class label.
inline std::vector<std::vector<Vec2>> class_hulls(const SystemState& q, const SortTask& task,
                                                  const Scenario& s, bool planner_view) {
  const auto labels = sorted_labels(task);
  std::vector<std::vector<Vec2>> hulls;
  hulls.reserve(labels.size());
  for (int label : labels) {
    std::vector<Vec2> pts;
    for (size_t i = 0; i < task.class_of.size(); ++i) {
      if (task.class_of[i] != label) continue;
      const ConvexPolygon& shape = planner_view ? s.planner_shape(i) : s.objects[i].shape;
      const auto world = world_vertices(shape, q.objects[i]);
      pts.insert(pts.end(), world.begin(), world.end());
    }
    hulls.push_back(convex_hull(pts));
  }
  return hulls;
}

}  // namespace detail

inline bool sort_goal(const SystemState& q, const SortTask& task, const Scenario& s,
                      bool planner_view = false) {
  const auto hulls = detail::class_hulls(q, task, s, planner_view);
  for (size_t i = 0; i < hulls.size(); ++i)
    for (size_t j = i + 1; j < hulls.size(); ++j)
      if (!(distance(hulls[i], hulls[j]) > task.eps_d)) return false;
  return true;
}

/// Sorting surrogate heuristic: same-class objects want to cluster (mean
/// pairwise centroid distance per class) while class hulls want to separate
/// (rewarded up to sep_cap). Lower is better.
inline double sort_heuristic(const SystemState& q, const SortTask& task, const Scenario& s,
                             bool planner_view = false) {
  const auto labels = detail::sorted_labels(task);
  double cohesion = 0.0;
  for (int label : labels) {
    std::vector<Vec2> centroids;
    for (size_t i = 0; i < task.class_of.size(); ++i)
      if (task.class_of[i] == label) centroids.push_back({q.objects[i].x, q.objects[i].y});
    if (centroids.size() < 2) continue;
    double sum = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < centroids.size(); ++i)
      for (size_t j = i + 1; j < centroids.size(); ++j) {
        sum += (centroids[i] - centroids[j]).norm();
        ++pairs;
      }
    cohesion += sum / static_cast<double>(pairs);
  }
  const auto hulls = detail::class_hulls(q, task, s, planner_view);
  double separation = 0.0;
  for (size_t i = 0; i < hulls.size(); ++i)
    for (size_t j = i + 1; j < hulls.size(); ++j)
      separation += std::min(distance(hulls[i], hulls[j]), task.sep_cap);
  return cohesion - task.lambda_sep * separation;
}

// ----------------------------------------------------------- task dispatch

inline bool goal_satisfied(const SystemState& q, const Scenario& s, bool planner_view = false) {
  return std::visit(
      [&](const auto& task) -> bool {
        using T = std::decay_t<decltype(task)>;
        if constexpr (std::is_same_v<T, GraspTask>) return grasp_goal(q, task, s);
        if constexpr (std::is_same_v<T, RelocateTask>) return relocate_goal(q, task);
        if constexpr (std::is_same_v<T, SortTask>) return sort_goal(q, task, s, planner_view);
      },
      s.task);
}

inline double task_heuristic(const SystemState& q, const Scenario& s,
                             bool planner_view = false) {
  return std::visit(
      [&](const auto& task) -> double {
        using T = std::decay_t<decltype(task)>;
        if constexpr (std::is_same_v<T, GraspTask>) return grasp_heuristic(q, task, s);
        if constexpr (std::is_same_v<T, RelocateTask>) return relocate_heuristic(q, task, s);
        if constexpr (std::is_same_v<T, SortTask>) return sort_heuristic(q, task, s, planner_view);
      },
      s.task);
}

/// Where goal-biased gripper samples should concentrate.
inline Vec2 task_focus(const Scenario& s, const SystemState& q) {
  return std::visit(
      [&](const auto& task) -> Vec2 {
        using T = std::decay_t<decltype(task)>;
        if constexpr (std::is_same_v<T, GraspTask>) {
          const Pose2& obj = q.objects[task.target_index];
          return {obj.x, obj.y};
        } else if constexpr (std::is_same_v<T, RelocateTask>) {
          return task.goal_center;
        } else {
          Vec2 mean;
          for (const Pose2& o : q.objects) mean = mean + Vec2{o.x, o.y};
          return mean * (1.0 / static_cast<double>(q.objects.size()));
        }
      },
      s.task);
}

}  // namespace rearrange
