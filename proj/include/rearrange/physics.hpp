#pragma once

#include <functional>

#include "rearrange/rng.hpp"
#include "rearrange/scenario.hpp"

namespace rearrange {

// ------------------------------------------------------- simulated clock
//
// Planning budgets are accounted in simulated seconds so batch results are
// bit-reproducible across machines. The model charges the narrow-phase: a
// pair test costs (nA+nB)^2 vertex-units (charged whether or not the
// broad-phase radius cull short-circuits it, so the charge depends only on
// the scene, not on incidental geometry), and every projected/integrated
// substep costs a fixed amount for the Jacobian/SVD math.
inline constexpr double kPairTestCost = 1.6e-8;  // s per squared vertex count
inline constexpr double kSubstepCost = 2e-5;     // s per substep

struct WorkMeter {
  double seconds = 0.0;
  long long pair_tests = 0;
  long long substeps = 0;

  void charge_pair(size_t na, size_t nb) {
    const double n = static_cast<double>(na + nb);
    seconds += kPairTestCost * n * n;
    ++pair_tests;
  }
  void charge_substeps(int n) {
    seconds += kSubstepCost * n;
    substeps += n;
  }
};

// ----------------------------------------------------------------- trace

// Body ids in trace contact pairs: movable objects use their index; the
// gripper and static geometry use the negative codes below.
inline constexpr int kGripperId = -1;
inline constexpr int kWallLeftId = -2;
inline constexpr int kWallRightId = -3;
inline constexpr int kWallBottomId = -4;
inline constexpr int kWallTopId = -5;
inline constexpr int kObstacleIdBase = -6;  // obstacle k -> -(6+k)

struct TraceRecord {
  double t = 0.0;
  JointConfig joints;
  Pose2 ee;
  std::vector<Pose2> objects;
  std::vector<std::pair<int, int>> contacts;
};

using TraceSink = std::function<void(const TraceRecord&)>;

struct SimOptions {
  bool planner_view = false;  // collide against planner_model_override shapes
  WorkMeter* meter = nullptr;
  TraceSink trace;
  double trace_time0 = 0.0;
};

namespace detail {

inline const ConvexPolygon& sim_shape(const Scenario& sc, size_t i, bool planner_view) {
  return planner_view ? sc.planner_shape(i) : sc.objects[i].shape;
}

struct StaticWorld {
  std::vector<std::pair<ConvexPolygon, Pose2>> gripper_bodies;  // gripper frame
  std::vector<std::vector<Vec2>> obstacle_verts;                // world frame
};

inline StaticWorld build_static(const Scenario& sc) {
  StaticWorld w;
  w.gripper_bodies = sc.gripper.bodies();
  w.obstacle_verts.reserve(sc.obstacles.size());
  for (const auto& [shape, pose] : sc.obstacles)
    w.obstacle_verts.push_back(world_vertices(shape, pose));
  return w;
}

inline std::vector<std::vector<Vec2>> link_quads(const ArmModel& arm, const JointConfig& q) {
  const auto pts = joint_positions(arm, q);
  std::vector<std::vector<Vec2>> quads;
  quads.reserve(arm.dof());
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 d = (pts[i + 1] - pts[i]).normalized();
    const Vec2 n = d.perp() * (arm.link_width / 2);
    quads.push_back({pts[i] - n, pts[i + 1] - n, pts[i + 1] + n, pts[i] + n});
  }
  return quads;
}

/// Robot-side validity: links mutually disjoint (non-adjacent pairs) and the
/// whole robot (links + gripper bodies) clear of static obstacles. Links do
/// not interact with movable objects: the arm travels above the plane and
/// only the gripper reaches object height.
inline bool robot_clear(const Scenario& sc, const StaticWorld& world,
                        const std::vector<std::vector<Vec2>>& quads, const Pose2& ee) {
  for (size_t i = 0; i + 2 < quads.size(); ++i)
    for (size_t j = i + 2; j < quads.size(); ++j)
      if (intersect(quads[i], quads[j]).has_value()) return false;
  for (const auto& quad : quads)
    for (const auto& obs : world.obstacle_verts)
      if (intersect(obs, quad).has_value()) return false;
  for (const auto& [shape, local] : world.gripper_bodies) {
    const auto verts = world_vertices(shape, compose(ee, local));
    for (const auto& obs : world.obstacle_verts)
      if (intersect(obs, verts).has_value()) return false;
  }
  return true;
}

/// One Gauss-Seidel resolution pass over all contacts at a fixed end-effector
/// pose. Pairs are visited in a fixed order (gripper->objects, object pairs,
/// obstacles, walls) so the result is bit-deterministic. Returns false when
/// the sweep limit is exhausted while bodies still move, or when an object
/// centroid ends up outside the workspace.
inline bool resolve_contacts(const Scenario& sc, const PhysicsConfig& cfg,
                             const StaticWorld& world, const Pose2& ee,
                             std::vector<Pose2>& objects, const SimOptions& opts,
                             std::vector<std::pair<int, int>>* contacts) {
  const size_t n = objects.size();
  const double tol = cfg.contact_tolerance;

  std::vector<Pose2> gripper_poses;
  gripper_poses.reserve(world.gripper_bodies.size());
  for (const auto& [shape, local] : world.gripper_bodies)
    gripper_poses.push_back(compose(ee, local));

  const auto charge = [&](size_t na, size_t nb) {
    if (opts.meter) opts.meter->charge_pair(na, nb);
  };

  // Pushed bodies also rotate about their centroid: the push at the contact
  // point drags the body around proportionally to the tangential lever arm
  // and the push depth. Scaling by depth keeps the per-sweep update small so
  // the Gauss-Seidel iteration stays convergent.
  const auto rotate_pushed = [&](Pose2& pose, const ConvexPolygon& shape, const Vec2& contact,
                                 const Vec2& push_axis, double depth) {
    if (cfg.rotation_coupling <= 0.0) return;
    const Vec2 r = contact - Vec2{pose.x, pose.y};
    const double rr = shape.bounding_radius * shape.bounding_radius;
    if (rr <= 0.0) return;
    const double dth =
        std::clamp(cfg.rotation_coupling * r.cross(push_axis) * depth / rr, -0.2, 0.2);
    pose = Pose2{pose.x, pose.y, pose.theta + dth};
  };

  const auto note = [&](int a, int b) {
    if (contacts) contacts->emplace_back(a, b);
  };

  for (int iter = 0;; ++iter) {
    if (iter >= cfg.max_resolution_iters) return false;
    bool moved = false;

    // gripper (infinite mass) pushes objects by the full depth
    for (size_t i = 0; i < n; ++i) {
      const auto& shape = sim_shape(sc, i, opts.planner_view);
      for (size_t g = 0; g < world.gripper_bodies.size(); ++g) {
        const auto& gshape = world.gripper_bodies[g].first;
        charge(gshape.vertices.size(), shape.vertices.size());
        const auto mtv = intersect(gshape, gripper_poses[g], shape, objects[i]);
        if (!mtv || mtv->depth <= tol) continue;
        const Vec2 c = contact_point(world_vertices(gshape, gripper_poses[g]),
                                     world_vertices(shape, objects[i]), mtv->axis);
        objects[i].x += mtv->axis.x * mtv->depth;
        objects[i].y += mtv->axis.y * mtv->depth;
        rotate_pushed(objects[i], shape, c, mtv->axis, mtv->depth);
        moved = true;
        note(kGripperId, static_cast<int>(i));
      }
    }

    // object-object: split the correction half/half
    for (size_t i = 0; i < n; ++i) {
      const auto& si = sim_shape(sc, i, opts.planner_view);
      for (size_t j = i + 1; j < n; ++j) {
        const auto& sj = sim_shape(sc, j, opts.planner_view);
        charge(si.vertices.size(), sj.vertices.size());
        const auto mtv = intersect(si, objects[i], sj, objects[j]);
        if (!mtv || mtv->depth <= tol) continue;
        const Vec2 c = contact_point(world_vertices(si, objects[i]),
                                     world_vertices(sj, objects[j]), mtv->axis);
        const Vec2 half = mtv->axis * (mtv->depth / 2);
        objects[i].x -= half.x;
        objects[i].y -= half.y;
        rotate_pushed(objects[i], si, c, -mtv->axis, mtv->depth / 2);
        objects[j].x += half.x;
        objects[j].y += half.y;
        rotate_pushed(objects[j], sj, c, mtv->axis, mtv->depth / 2);
        moved = true;
        note(static_cast<int>(i), static_cast<int>(j));
      }
    }

    // immovable obstacles push objects back by the full depth (pure
    // constraint projection, no frictional rotation)
    for (size_t k = 0; k < sc.obstacles.size(); ++k) {
      const auto& [oshape, opose] = sc.obstacles[k];
      for (size_t i = 0; i < n; ++i) {
        const auto& shape = sim_shape(sc, i, opts.planner_view);
        charge(oshape.vertices.size(), shape.vertices.size());
        const auto mtv = intersect(oshape, opose, shape, objects[i]);
        if (!mtv || mtv->depth <= tol) continue;
        objects[i].x += mtv->axis.x * mtv->depth;
        objects[i].y += mtv->axis.y * mtv->depth;
        moved = true;
        note(kObstacleIdBase - static_cast<int>(k), static_cast<int>(i));
      }
    }

    // workspace walls hold an object back only while its centroid is still
    // inside; once the centroid crosses the boundary the object counts as
    // ejected and the final containment check below fails the state
    for (size_t i = 0; i < n; ++i) {
      if (!sc.workspace.contains({objects[i].x, objects[i].y})) continue;
      const auto& shape = sim_shape(sc, i, opts.planner_view);
      const auto verts = world_vertices(shape, objects[i]);
      double min_x = verts[0].x, max_x = verts[0].x, min_y = verts[0].y, max_y = verts[0].y;
      for (const Vec2& v : verts) {
        min_x = std::min(min_x, v.x);
        max_x = std::max(max_x, v.x);
        min_y = std::min(min_y, v.y);
        max_y = std::max(max_y, v.y);
      }
      if (sc.workspace.min.x - min_x > tol) {
        objects[i].x += sc.workspace.min.x - min_x;
        moved = true;
        note(kWallLeftId, static_cast<int>(i));
      }
      if (max_x - sc.workspace.max.x > tol) {
        objects[i].x -= max_x - sc.workspace.max.x;
        moved = true;
        note(kWallRightId, static_cast<int>(i));
      }
      if (sc.workspace.min.y - min_y > tol) {
        objects[i].y += sc.workspace.min.y - min_y;
        moved = true;
        note(kWallBottomId, static_cast<int>(i));
      }
      if (max_y - sc.workspace.max.y > tol) {
        objects[i].y -= max_y - sc.workspace.max.y;
        moved = true;
        note(kWallTopId, static_cast<int>(i));
      }
    }

    if (!moved) break;
  }

  for (const Pose2& pose : objects) {
    if (!std::isfinite(pose.x) || !std::isfinite(pose.y) || !std::isfinite(pose.theta))
      return false;
    if (!sc.workspace.contains({pose.x, pose.y})) return false;
  }
  return true;
}

}  // namespace detail

/// Advances the world through one joint-space control segment: per substep,
/// integrate the joints, require the robot to stay self- and obstacle-clear,
/// and settle object contacts. Replaying the same segment from the same state
/// is bit-exact.
inline SystemState simulate_segment(const Scenario& sc, const ArmModel& arm,
                                    const PhysicsConfig& cfg, const SystemState& start,
                                    const ControlSegment& segment,
                                    const SimOptions& opts = {}) {
  SystemState q = start;
  if (!q.valid) return q;
  const auto world = detail::build_static(sc);
  double t = opts.trace_time0;
  for (const auto& sample : segment.samples) {
    if (opts.meter) opts.meter->charge_substeps(1);
    for (size_t j = 0; j < sample.velocities.size(); ++j)
      q.joints.angles[j] += sample.velocities[j] * sample.dt;
    t += sample.dt;
    if (!arm.within_limits(q.joints)) {
      q.valid = false;
      return q;
    }
    const Pose2 ee = forward_kinematics(arm, q.joints);
    q.ee = ee;
    if (!detail::robot_clear(sc, world, detail::link_quads(arm, q.joints), ee)) {
      q.valid = false;
      return q;
    }
    std::vector<std::pair<int, int>> contacts;
    if (!detail::resolve_contacts(sc, cfg, world, ee, q.objects, opts,
                                  opts.trace ? &contacts : nullptr)) {
      q.valid = false;
      return q;
    }
    if (opts.trace) opts.trace(TraceRecord{t, q.joints, ee, q.objects, std::move(contacts)});
  }
  q.valid = true;
  return q;
}

struct TwistOutcome {
  SystemState state;
  std::optional<ControlSegment> segment;
};

/// The transition function: project the end-effector twist into joint space,
/// then simulate the resulting segment. A failed projection yields an invalid
/// state (and still charges the attempted substeps to the meter).
inline TwistOutcome simulate_twist(const Scenario& sc, const ArmModel& arm,
                                   const PhysicsConfig& cfg, const SystemState& start,
                                   const Twist& v, const SimOptions& opts = {}) {
  auto segment = jacobian_projection(arm, start.joints, v, cfg.substep);
  if (!segment.has_value()) {
    if (opts.meter)
      opts.meter->charge_substeps(static_cast<int>(std::round(v.duration / cfg.substep)));
    SystemState q = start;
    q.valid = false;
    return {std::move(q), std::nullopt};
  }
  SystemState state = simulate_segment(sc, arm, cfg, start, *segment, opts);
  return {std::move(state), std::move(segment)};
}

inline SystemState step(const SystemState& state, const Twist& v, const ArmModel& arm,
                        const Scenario& sc, const PhysicsConfig& cfg) {
  return simulate_twist(sc, arm, cfg, state, v).state;
}

/// Validity predicate over a bare state: robot self/obstacle clearance,
/// object containment, and no penetration beyond the contact tolerance.
/// Object-object and object-obstacle touching is allowed.
inline bool is_valid(const SystemState& state, const ArmModel& arm, const Scenario& sc) {
  const double tol = sc.physics.contact_tolerance;
  const auto world = detail::build_static(sc);
  const Pose2 ee = forward_kinematics(arm, state.joints);
  if (!detail::robot_clear(sc, world, detail::link_quads(arm, state.joints), ee)) return false;

  std::vector<std::vector<Vec2>> object_verts;
  object_verts.reserve(state.objects.size());
  for (size_t i = 0; i < state.objects.size(); ++i) {
    const Pose2& pose = state.objects[i];
    if (!std::isfinite(pose.x) || !std::isfinite(pose.y) || !std::isfinite(pose.theta))
      return false;
    if (!sc.workspace.contains({pose.x, pose.y})) return false;
    object_verts.push_back(world_vertices(sc.objects[i].shape, pose));
  }

  const auto too_deep = [&](const std::optional<Mtv>& mtv) {
    return mtv.has_value() && mtv->depth > tol;
  };
  for (size_t i = 0; i < object_verts.size(); ++i) {
    for (const auto& [gshape, local] : world.gripper_bodies) {
      const auto gverts = world_vertices(gshape, compose(ee, local));
      if (too_deep(intersect(gverts, object_verts[i]))) return false;
    }
    for (size_t j = i + 1; j < object_verts.size(); ++j)
      if (too_deep(intersect(object_verts[i], object_verts[j]))) return false;
    for (const auto& obs : world.obstacle_verts)
      if (too_deep(intersect(obs, object_verts[i]))) return false;
    for (const Vec2& v : object_verts[i]) {
      if (sc.workspace.min.x - v.x > tol || v.x - sc.workspace.max.x > tol) return false;
      if (sc.workspace.min.y - v.y > tol || v.y - sc.workspace.max.y > tol) return false;
    }
  }
  return true;
}

/// Nondeterministic-physics injection: one uniformly chosen object receives a
/// linear shove of speed x duration along a uniformly random direction, then
/// contacts settle under the usual rule. Deterministic given the rng.
inline SystemState perturb(const SystemState& state, Rng& rng, double speed, double duration,
                           const ArmModel& arm, const Scenario& sc, const PhysicsConfig& cfg) {
  SystemState q = state;
  if (q.objects.empty() || speed * duration == 0.0) return q;
  const size_t index = rng.uniform_index(q.objects.size());
  const double direction = rng.angle();
  q.objects[index].x += speed * duration * std::cos(direction);
  q.objects[index].y += speed * duration * std::sin(direction);

  const auto world = detail::build_static(sc);
  const Pose2 ee = forward_kinematics(arm, q.joints);
  const SimOptions opts;  // executor-side: true shapes, no metering
  if (!detail::resolve_contacts(sc, cfg, world, ee, q.objects, opts, nullptr)) q.valid = false;
  return q;
}

}  // namespace rearrange
