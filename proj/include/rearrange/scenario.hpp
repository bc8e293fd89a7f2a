#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rearrange/geometry.hpp"
#include "rearrange/kinematics.hpp"

namespace rearrange {

/// Parallel-jaw gripper: a palm bar with two fingers opening along local +x.
/// The finger region (the grasp set G^R of the grasping task) is the gap
/// between the fingers, ahead of the palm.
struct GripperGeometry {
  double finger_gap = 0.08;
  double finger_depth = 0.06;
  double finger_width = 0.012;
  double palm_thickness = 0.016;

  Rect finger_region() const {
    return Rect{{0.0, -finger_gap / 2}, {finger_depth, finger_gap / 2}};
  }

  /// Collision bodies with their poses in the gripper (end-effector) frame.
  std::vector<std::pair<ConvexPolygon, Pose2>> bodies() const {
    const double palm_width = finger_gap + 2 * finger_width;
    const double finger_y = (finger_gap + finger_width) / 2;
    return {
        {ConvexPolygon::box(palm_thickness, palm_width), Pose2{-palm_thickness / 2, 0, 0}},
        {ConvexPolygon::box(finger_depth, finger_width), Pose2{finger_depth / 2, finger_y, 0}},
        {ConvexPolygon::box(finger_depth, finger_width), Pose2{finger_depth / 2, -finger_y, 0}},
    };
  }
};

struct PhysicsConfig {
  double substep = 0.01;          // s
  int max_resolution_iters = 32;  // Gauss-Seidel sweeps per substep
  double rotation_coupling = 0.3;
  double contact_tolerance = 1e-4;  // m
};

struct GraspTask {
  size_t target_index = 0;
  double eps_alpha = 0.2;  // rad
  double w_d = 0.7;
  double w_alpha = 0.3;
  // Feasible approach angles for the target at orientation 0; goal checks
  // rotate them by the target's current orientation.
  std::vector<double> base_angles;
};

struct RelocateTask {
  size_t target_index = 0;
  Vec2 goal_center;
  double goal_radius = 0.1;  // m
};

struct SortTask {
  std::vector<int> class_of;  // object index -> class label
  double eps_d = 0.1;         // m, required hull separation (strict)
  double lambda_sep = 1.0;
  double sep_cap = 0.3;  // m, saturation of the separation reward (3*eps_d)
};

using TaskSpec = std::variant<GraspTask, RelocateTask, SortTask>;

struct ObjectSpec {
  ConvexPolygon shape;
  Pose2 start;
  int class_label = 0;
};

/// One experiment world: static geometry, the arm, the movable objects, and
/// the task. planner_model_override, when present, is what the planner
/// believes the object shapes to be; the executor always uses the true shapes.
struct Scenario {
  std::string name;
  Rect workspace;
  std::vector<std::pair<ConvexPolygon, Pose2>> obstacles;
  std::vector<ObjectSpec> objects;
  ArmModel arm;
  JointConfig start_joints;
  GripperGeometry gripper;
  TaskSpec task;
  PhysicsConfig physics;
  std::optional<std::vector<ConvexPolygon>> planner_model_override;

  size_t object_count() const { return objects.size(); }

  const ConvexPolygon& planner_shape(size_t i) const {
    if (planner_model_override.has_value()) return (*planner_model_override)[i];
    return objects[i].shape;
  }
};

/// World state: joint configuration plus one pose per movable object. Shapes
/// are centroid-centered, so each object pose's translation is its centroid.
/// ee caches the end-effector pose: forward kinematics of joints for real
/// states, or the sampled gripper pose for joint-less steering targets.
struct SystemState {
  JointConfig joints;
  std::vector<Pose2> objects;
  Pose2 ee;
  bool valid = true;

  // ee is derived state and deliberately excluded
  bool operator==(const SystemState& o) const {
    return valid == o.valid && joints == o.joints && objects == o.objects;
  }
};

inline SystemState initial_state(const Scenario& s) {
  SystemState q;
  q.joints = s.start_joints;
  q.objects.reserve(s.objects.size());
  for (const auto& obj : s.objects) q.objects.push_back(obj.start);
  q.ee = forward_kinematics(s.arm, s.start_joints);
  q.valid = true;
  return q;
}

inline Pose2 gripper_pose(const Scenario& s, const SystemState& q) {
  return forward_kinematics(s.arm, q.joints);
}

}  // namespace rearrange
