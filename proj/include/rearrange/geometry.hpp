#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rearrange/math2d.hpp"

namespace rearrange {

// Depth at or below this counts as touching, not penetration.
inline constexpr double kTouchTolerance = 1e-9;

inline double polygon_signed_area(const std::vector<Vec2>& v) {
  double a = 0.0;
  const size_t n = v.size();
  for (size_t i = 0; i < n; ++i) a += v[i].cross(v[(i + 1) % n]);
  return 0.5 * a;
}

inline Vec2 polygon_centroid(const std::vector<Vec2>& v) {
  const size_t n = v.size();
  if (n == 1) return v[0];
  if (n == 2) return (v[0] + v[1]) * 0.5;
  double a = 0.0;
  Vec2 c{0.0, 0.0};
  for (size_t i = 0; i < n; ++i) {
    const Vec2& p = v[i];
    const Vec2& q = v[(i + 1) % n];
    const double w = p.cross(q);
    a += w;
    c += (p + q) * w;
  }
  if (std::abs(a) < 1e-300) {  // degenerate (collinear) ring
    Vec2 m{0.0, 0.0};
    for (const Vec2& p : v) m += p;
    return m * (1.0 / static_cast<double>(n));
  }
  return c * (1.0 / (3.0 * a));
}

inline bool polygon_is_strictly_convex_ccw(const std::vector<Vec2>& v, double eps = 1e-12) {
  const size_t n = v.size();
  if (n < 3) return false;
  for (size_t i = 0; i < n; ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % n];
    const Vec2& c = v[(i + 2) % n];
    if ((b - a).cross(c - b) <= eps) return false;
  }
  return true;
}

/// A strictly convex polygon in body frame, CCW, area centroid at the origin.
struct ConvexPolygon {
  std::vector<Vec2> vertices;
  double bounding_radius = 0.0;  // max vertex norm, cached at construction

  ConvexPolygon() = default;

  /// Builds from arbitrary-order corner points: orients CCW, re-centers on the
  /// area centroid, and validates strict convexity. Throws on invalid input.
  static ConvexPolygon create(std::vector<Vec2> pts) {
    if (pts.size() < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
    if (polygon_signed_area(pts) < 0.0) std::reverse(pts.begin(), pts.end());
    const Vec2 c = polygon_centroid(pts);
    for (Vec2& p : pts) p -= c;
    if (!polygon_is_strictly_convex_ccw(pts))
      throw std::invalid_argument("polygon is not strictly convex");
    ConvexPolygon out;
    out.vertices = std::move(pts);
    out.recompute_radius();
    return out;
  }

  static ConvexPolygon box(double width, double height) {
    const double hw = width * 0.5, hh = height * 0.5;
    return create({{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}});
  }

  static ConvexPolygon regular(int sides, double radius) {
    std::vector<Vec2> pts;
    pts.reserve(sides);
    for (int i = 0; i < sides; ++i) {
      const double a = 2.0 * kPi * i / sides;
      pts.push_back({radius * std::cos(a), radius * std::sin(a)});
    }
    return create(std::move(pts));
  }

  void recompute_radius() {
    bounding_radius = 0.0;
    for (const Vec2& p : vertices) bounding_radius = std::max(bounding_radius, p.norm());
  }

  bool operator==(const ConvexPolygon& o) const { return vertices == o.vertices; }
};

inline std::vector<Vec2> world_vertices(const ConvexPolygon& shape, const Pose2& pose) {
  std::vector<Vec2> out;
  out.reserve(shape.vertices.size());
  for (const Vec2& p : shape.vertices) out.push_back(pose.transform(p));
  return out;
}

/// Minimum translation vector: moving the second body by axis*depth resolves
/// the overlap. axis is unit length, depth > 0.
struct Mtv {
  Vec2 axis;
  double depth = 0.0;
};

namespace detail {

inline void project_onto(const std::vector<Vec2>& v, const Vec2& axis, double& lo, double& hi) {
  lo = hi = v[0].dot(axis);
  for (size_t i = 1; i < v.size(); ++i) {
    const double d = v[i].dot(axis);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
}

// Scans one polygon's edge normals; returns false if a separating axis is
// found, else tracks the smallest directed push that would free b. The two
// one-sided pushes (not their interval overlap) are what keeps the MTV sound
// when one projection interval contains the other.
inline bool sat_scan(const std::vector<Vec2>& edges_of, const std::vector<Vec2>& a,
                     const std::vector<Vec2>& b, double& best_depth, Vec2& best_axis) {
  const size_t n = edges_of.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec2 e = edges_of[(i + 1) % n] - edges_of[i];
    const Vec2 axis = Vec2{e.y, -e.x}.normalized();
    if (axis.x == 0.0 && axis.y == 0.0) continue;
    double lo_a, hi_a, lo_b, hi_b;
    project_onto(a, axis, lo_a, hi_a);
    project_onto(b, axis, lo_b, hi_b);
    const double push_pos = hi_a - lo_b;  // translate b along +axis
    const double push_neg = hi_b - lo_a;  // translate b along -axis
    if (std::min(push_pos, push_neg) <= kTouchTolerance) return false;
    if (push_pos <= push_neg) {
      if (push_pos < best_depth) {
        best_depth = push_pos;
        best_axis = axis;
      }
    } else if (push_neg < best_depth) {
      best_depth = push_neg;
      best_axis = -axis;
    }
  }
  return true;
}

}  // namespace detail

/// Separating-axis test over both polygons' edge normals. Returns the MTV that
/// pushes b out of a, or nullopt when disjoint or merely touching.
inline std::optional<Mtv> intersect(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  double depth = std::numeric_limits<double>::infinity();
  Vec2 axis;
  if (!detail::sat_scan(a, a, b, depth, axis)) return std::nullopt;
  if (!detail::sat_scan(b, a, b, depth, axis)) return std::nullopt;
  return Mtv{axis, depth};
}

inline std::optional<Mtv> intersect(const ConvexPolygon& a, const Pose2& pa,
                                    const ConvexPolygon& b, const Pose2& pb) {
  const Vec2 d{pb.x - pa.x, pb.y - pa.y};
  const double reach = a.bounding_radius + b.bounding_radius;
  if (d.squared_norm() > reach * reach) return std::nullopt;
  return intersect(world_vertices(a, pa), world_vertices(b, pb));
}

inline bool point_in_convex(const Vec2& p, const std::vector<Vec2>& v, double eps = 0.0) {
  const size_t n = v.size();
  if (n < 3) return false;
  for (size_t i = 0; i < n; ++i) {
    if ((v[(i + 1) % n] - v[i]).cross(p - v[i]) < -eps) return false;
  }
  return true;
}

/// Euclidean separation of two convex vertex sets; 0 when overlapping or
/// touching. Degenerate sets (points, segments) are handled.
inline double distance(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  if (point_in_convex(a[0], b) || point_in_convex(b[0], a)) return 0.0;
  const auto edge_count = [](const std::vector<Vec2>& v) {
    return v.size() == 1 ? size_t{1} : (v.size() == 2 ? size_t{1} : v.size());
  };
  const size_t na = edge_count(a), nb = edge_count(b);
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < na; ++i) {
    const Vec2& p1 = a[i];
    const Vec2& p2 = a[(i + 1) % a.size()];
    for (size_t j = 0; j < nb; ++j) {
      const Vec2& q1 = b[j];
      const Vec2& q2 = b[(j + 1) % b.size()];
      best = std::min(best, segment_distance(p1, p2, q1, q2));
      if (best == 0.0) return 0.0;
    }
  }
  return best;
}

inline double distance(const ConvexPolygon& a, const Pose2& pa, const ConvexPolygon& b,
                       const Pose2& pb) {
  return distance(world_vertices(a, pa), world_vertices(b, pb));
}

/// Andrew monotone chain, CCW output. Degenerate inputs (single point,
/// collinear sets) yield the degenerate hull.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& p, const Vec2& q) {
    return p.x < q.x || (p.x == q.x && p.y < q.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const size_t n = pts.size();
  if (n <= 2) return pts;
  std::vector<Vec2> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {  // lower
    while (k >= 2 && (hull[k - 1] - hull[k - 2]).cross(pts[i] - hull[k - 2]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = n - 1; i-- > 0;) {  // upper
    while (k >= lower && (hull[k - 1] - hull[k - 2]).cross(pts[i] - hull[k - 2]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Decimates to max(3, ceil(rate*n)) vertices, dropping the vertex with the
/// smallest area contribution first; the result is re-centered. rate == 1 is
/// the identity.
inline ConvexPolygon simplify(const ConvexPolygon& shape, double rate) {
  if (rate <= 0.0 || rate > 1.0) throw std::invalid_argument("simplify rate must be in (0, 1]");
  if (rate == 1.0) return shape;
  const size_t n = shape.vertices.size();
  const size_t target =
      std::max<size_t>(3, static_cast<size_t>(std::ceil(rate * static_cast<double>(n) - 1e-9)));
  if (target >= n) return shape;
  std::vector<Vec2> v = shape.vertices;
  while (v.size() > target) {
    size_t drop = 0;
    double best = std::numeric_limits<double>::infinity();
    const size_t m = v.size();
    for (size_t i = 0; i < m; ++i) {
      const Vec2& prev = v[(i + m - 1) % m];
      const Vec2& next = v[(i + 1) % m];
      const double contribution = 0.5 * std::abs((v[i] - prev).cross(next - prev));
      if (contribution < best) {
        best = contribution;
        drop = i;
      }
    }
    v.erase(v.begin() + static_cast<long>(drop));
  }
  const Vec2 c = polygon_centroid(v);
  for (Vec2& p : v) p -= c;
  ConvexPolygon out;
  out.vertices = std::move(v);
  out.recompute_radius();
  return out;
}

/// Mean of the deepest support vertices of both bodies along the push axis;
/// used as the application point for push-induced rotation.
inline Vec2 contact_point(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                          const Vec2& axis) {
  const auto support_mean = [](const std::vector<Vec2>& v, const Vec2& dir) {
    double best = -std::numeric_limits<double>::infinity();
    for (const Vec2& p : v) best = std::max(best, p.dot(dir));
    Vec2 sum{0.0, 0.0};
    int count = 0;
    for (const Vec2& p : v) {
      if (p.dot(dir) >= best - 1e-6) {
        sum += p;
        ++count;
      }
    }
    return sum * (1.0 / count);
  };
  return (support_mean(a, axis) + support_mean(b, -axis)) * 0.5;
}

}  // namespace rearrange
