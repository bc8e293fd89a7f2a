#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rearrange/math2d.hpp"

namespace rearrange {

// End-effector speed bounds used when sampling candidate twists.
inline constexpr double kMaxLinearSpeed = 0.2;   // m/s
inline constexpr double kMaxAngularSpeed = 1.0;  // rad/s

/// se(2) end-effector velocity command held for a fixed duration.
struct Twist {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;
  double duration = 0.0;
};

struct JointConfig {
  std::vector<double> angles;

  bool operator==(const JointConfig& o) const { return angles == o.angles; }
};

/// Planar revolute chain anchored at base_pose. The 3-row task Jacobian needs
/// r >= 3; the default scenarios use a redundant 4-link arm.
struct ArmModel {
  Pose2 base_pose;
  std::vector<double> link_lengths;
  std::vector<std::pair<double, double>> joint_limits;
  double manipulability_threshold = 1e-3;
  double link_width = 0.02;

  size_t dof() const { return link_lengths.size(); }

  bool within_limits(const JointConfig& q) const {
    if (q.angles.size() != joint_limits.size()) return false;
    for (size_t i = 0; i < q.angles.size(); ++i) {
      if (!std::isfinite(q.angles[i])) return false;
      if (q.angles[i] < joint_limits[i].first || q.angles[i] > joint_limits[i].second)
        return false;
    }
    return true;
  }

  static ArmModel make(Pose2 base, std::vector<double> lengths, double limit = 2.8) {
    if (lengths.size() < 3) throw std::invalid_argument("arm needs at least 3 links");
    ArmModel arm;
    arm.base_pose = base;
    arm.joint_limits.assign(lengths.size(), {-limit, limit});
    arm.link_lengths = std::move(lengths);
    return arm;
  }
};

/// Joint-space realization of one end-effector twist: per-substep velocity
/// vectors from the Jacobian pseudo-inverse.
struct ControlSegment {
  struct Sample {
    std::vector<double> velocities;  // rad/s, length r
    double dt = 0.0;
  };
  std::vector<Sample> samples;
  Twist source_twist;

  double duration() const {
    double t = 0.0;
    for (const auto& s : samples) t += s.dt;
    return t;
  }
};

/// Joint origins along the chain: positions[0] is the base, positions[r] the
/// end-effector.
inline std::vector<Vec2> joint_positions(const ArmModel& arm, const JointConfig& q) {
  std::vector<Vec2> pts;
  pts.reserve(arm.dof() + 1);
  double x = arm.base_pose.x, y = arm.base_pose.y, th = arm.base_pose.theta;
  pts.push_back({x, y});
  for (size_t i = 0; i < arm.dof(); ++i) {
    th += q.angles[i];
    x += arm.link_lengths[i] * std::cos(th);
    y += arm.link_lengths[i] * std::sin(th);
    pts.push_back({x, y});
  }
  return pts;
}

inline Pose2 forward_kinematics(const ArmModel& arm, const JointConfig& q) {
  double x = arm.base_pose.x, y = arm.base_pose.y, th = arm.base_pose.theta;
  for (size_t i = 0; i < arm.dof(); ++i) {
    th += q.angles[i];
    x += arm.link_lengths[i] * std::cos(th);
    y += arm.link_lengths[i] * std::sin(th);
  }
  return Pose2{x, y, th};
}

/// 3×r end-effector Jacobian: rows (∂x/∂θ, ∂y/∂θ, ∂φ/∂θ). Column j is the
/// cross-product form about joint j; the third row is all ones for a planar
/// revolute chain.
inline Eigen::Matrix<double, 3, Eigen::Dynamic> jacobian(const ArmModel& arm,
                                                         const JointConfig& q) {
  const auto pts = joint_positions(arm, q);
  const Vec2 ee = pts.back();
  Eigen::Matrix<double, 3, Eigen::Dynamic> J(3, static_cast<Eigen::Index>(arm.dof()));
  for (size_t j = 0; j < arm.dof(); ++j) {
    const Vec2 r = ee - pts[j];
    J(0, static_cast<Eigen::Index>(j)) = -r.y;
    J(1, static_cast<Eigen::Index>(j)) = r.x;
    J(2, static_cast<Eigen::Index>(j)) = 1.0;
  }
  return J;
}

/// sqrt(det(J·Jᵀ)); rounding noise (|det| < 1e-12) clamps to 0 so singular
/// configurations compare exactly against the threshold.
inline double manipulability(const Eigen::Matrix<double, 3, Eigen::Dynamic>& J) {
  const double det = (J * J.transpose()).determinant();
  if (std::abs(det) < 1e-12) return 0.0;
  return std::sqrt(std::max(det, 0.0));
}

/// Moore–Penrose pseudo-inverse via SVD; singular values below 1e-10 are
/// truncated.
inline Eigen::MatrixXd pseudo_inverse(const Eigen::Matrix<double, 3, Eigen::Dynamic>& J) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd inv = svd.singularValues();
  for (Eigen::Index i = 0; i < inv.size(); ++i)
    inv(i) = inv(i) < 1e-10 ? 0.0 : 1.0 / inv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

using JointValidity = std::function<bool(const JointConfig&)>;

// A feedforward resolved-rate controller cannot execute arbitrarily fast
// joints, and the quasi-static model is only trusted when the end-effector
// actually tracks the commanded twist. kMaxJointSpeed bounds the
// pseudo-inverse amplification near singularities; the final tracking check
// rejects segments whose integrated end-effector motion strays from
// v·duration (tolerance grows linearly with duration: 1e-3 m per 0.2 s).
inline constexpr double kMaxJointSpeed = 3.0;          // rad/s
inline constexpr double kTrackingTolPerSecond = 5e-3;  // m (and rad) per second

/// Projects an end-effector twist to a joint-velocity trajectory by iterating
/// u_i = pinv(J_i)·v over substeps of length dt. Absent when any substep
/// configuration leaves the joint limits, fails the optional validity hook,
/// drops below the manipulability threshold, exceeds the joint speed bound,
/// or when the integrated end-effector motion fails to track the twist.
inline std::optional<ControlSegment> jacobian_projection(const ArmModel& arm,
                                                         const JointConfig& start,
                                                         const Twist& v, double dt,
                                                         const JointValidity& valid = {}) {
  if (dt <= 0.0 || v.duration <= 0.0) return std::nullopt;
  const int substeps = static_cast<int>(std::round(v.duration / dt));
  if (substeps < 1 || std::abs(substeps * dt - v.duration) > 1e-9) return std::nullopt;

  const auto admissible = [&](const JointConfig& q) {
    if (!arm.within_limits(q)) return false;
    if (valid && !valid(q)) return false;
    return manipulability(jacobian(arm, q)) >= arm.manipulability_threshold;
  };

  JointConfig q = start;
  if (!admissible(q)) return std::nullopt;

  Eigen::Vector3d task(v.vx, v.vy, v.omega);
  ControlSegment segment;
  segment.source_twist = v;
  segment.samples.reserve(static_cast<size_t>(substeps));
  for (int i = 0; i < substeps; ++i) {
    const Eigen::VectorXd u = pseudo_inverse(jacobian(arm, q)) * task;
    if (!u.allFinite() || u.norm() > kMaxJointSpeed) return std::nullopt;
    ControlSegment::Sample sample;
    sample.dt = dt;
    sample.velocities.resize(arm.dof());
    for (size_t j = 0; j < arm.dof(); ++j) {
      sample.velocities[j] = u(static_cast<Eigen::Index>(j));
      q.angles[j] += sample.velocities[j] * dt;
    }
    if (!admissible(q)) return std::nullopt;
    segment.samples.push_back(std::move(sample));
  }

  const Pose2 before = forward_kinematics(arm, start);
  const Pose2 after = forward_kinematics(arm, q);
  const double tol = kTrackingTolPerSecond * v.duration;
  if (std::abs(after.x - before.x - v.vx * v.duration) > tol) return std::nullopt;
  if (std::abs(after.y - before.y - v.vy * v.duration) > tol) return std::nullopt;
  if (std::abs(angular_distance(after.theta,
                                wrap_angle(before.theta + v.omega * v.duration))) > tol)
    return std::nullopt;
  return segment;
}

/// Integrates a control segment from a start configuration (explicit Euler,
/// matching the projection).
inline JointConfig integrate(const JointConfig& start, const ControlSegment& segment) {
  JointConfig q = start;
  for (const auto& s : segment.samples)
    for (size_t j = 0; j < s.velocities.size(); ++j) q.angles[j] += s.velocities[j] * s.dt;
  return q;
}

}  // namespace rearrange
