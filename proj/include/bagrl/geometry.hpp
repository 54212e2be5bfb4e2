#pragma once

// Planar geometry used by the perception side of the bagging task: the
// triangle-fan opening-area estimate, pose-point gridding, and a shoelace
// polygon area used to sanity-check the fan.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "bagrl/error.hpp"

namespace bagrl::geometry {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Triangle {
  Point2 a;
  Point2 b;
  Point2 c;
};

/// Axis-aligned box given by its minimum and maximum corners.
struct Box {
  Point2 min;
  Point2 max;

  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  Point2 center() const { return {(min.x + max.x) / 2.0, (min.y + max.y) / 2.0}; }
  double diagonal() const { return std::hypot(width(), height()); }
};

namespace detail {

inline void require_finite(const Point2& p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
    throw Error(ErrorCode::invalid_input, "non-finite coordinate");
  }
}

inline void require_finite(std::span<const Point2> points) {
  for (const auto& p : points) require_finite(p);
}

inline double squared_distance(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

}  // namespace detail

/// Unsigned area, half the absolute cross product of two edges.
inline double triangle_area(const Triangle& t) {
  detail::require_finite(t.a);
  detail::require_finite(t.b);
  detail::require_finite(t.c);
  const double cross = (t.b.x - t.a.x) * (t.c.y - t.a.y) - (t.c.x - t.a.x) * (t.b.y - t.a.y);
  return std::abs(cross) / 2.0;
}

inline Point2 centroid(std::span<const Point2> points) {
  if (points.empty()) throw Error(ErrorCode::invalid_input, "centroid of empty point list");
  detail::require_finite(points);
  double sx = 0.0;
  double sy = 0.0;
  for (const auto& p : points) {
    sx += p.x;
    sy += p.y;
  }
  const auto n = static_cast<double>(points.size());
  return {sx / n, sy / n};
}

/// Nearest non-excluded point to `target`. Equal distances resolve to the
/// lowest index. Exclusion is by index, so a query point that is itself a
/// member of `points` is skipped only when its index is listed.
inline std::pair<std::size_t, Point2> find_closest_node(const Point2& target,
                                                        std::span<const Point2> points,
                                                        std::span<const std::size_t> excluded = {}) {
  detail::require_finite(target);
  detail::require_finite(points);
  std::size_t best = points.size();
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (std::find(excluded.begin(), excluded.end(), i) != excluded.end()) continue;
    const double d2 = detail::squared_distance(target, points[i]);
    if (best == points.size() || d2 < best_d2) {
      best = i;
      best_d2 = d2;
    }
  }
  if (best == points.size()) {
    throw Error(ErrorCode::invalid_input, "every candidate point is excluded");
  }
  return {best, points[best]};
}

/// Triangles generated by the opening-area fan. Every triangle has the
/// centroid of the input as its first vertex. Fewer than 3 points yields no
/// triangles.
///
/// Each round takes the point nearest the centroid (n), then its nearest
/// neighbour (m), then the nearest neighbour of n once m is set aside (o),
/// emits [c, n, m] and [c, n, o], and drops n from the working set. Rounds
/// stop once fewer than 3 points remain.
inline std::vector<Triangle> opening_fan(std::span<const Point2> points) {
  detail::require_finite(points);
  std::vector<Triangle> triangles;
  if (points.size() < 3) return triangles;

  const Point2 center = centroid(points);
  std::vector<Point2> remaining(points.begin(), points.end());
  triangles.reserve(2 * (remaining.size() - 2));
  while (true) {
    const auto [i, n] = find_closest_node(center, remaining);
    const std::size_t skip_n[] = {i};
    const auto [j, m] = find_closest_node(n, remaining, skip_n);
    triangles.push_back({center, n, m});
    const std::size_t skip_nm[] = {i, j};
    const auto o = find_closest_node(n, remaining, skip_nm).second;
    triangles.push_back({center, n, o});
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(i));
    if (remaining.size() < 3) break;
  }
  return triangles;
}

/// Opening area as the sum of the fan's unsigned triangle areas. This is an
/// estimate: it undercounts convex polygons (the unit square gives 0.75).
inline double opening_area(std::span<const Point2> points) {
  double area = 0.0;
  for (const auto& t : opening_fan(points)) area += triangle_area(t);
  return area;
}

/// Unsigned shoelace area of the polygon through `points` in order.
inline double polygon_area(std::span<const Point2> points) {
  if (points.size() < 3) throw Error(ErrorCode::invalid_input, "polygon needs at least 3 points");
  detail::require_finite(points);
  double twice = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    const auto& q = points[(i + 1) % points.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  return std::abs(twice) / 2.0;
}

/// Centers of a zeta x zeta subdivision of `region`, row-major (y outer, x inner).
inline std::vector<Point2> grid_points(const Box& region, std::size_t zeta) {
  detail::require_finite(region.min);
  detail::require_finite(region.max);
  if (zeta == 0) throw Error(ErrorCode::invalid_input, "grid parameter must be positive");
  if (!(region.width() > 0.0) || !(region.height() > 0.0)) {
    throw Error(ErrorCode::invalid_input, "degenerate grid region");
  }
  const double dx = region.width() / static_cast<double>(zeta);
  const double dy = region.height() / static_cast<double>(zeta);
  std::vector<Point2> out;
  out.reserve(zeta * zeta);
  for (std::size_t r = 0; r < zeta; ++r) {
    for (std::size_t c = 0; c < zeta; ++c) {
      out.push_back({region.min.x + (static_cast<double>(c) + 0.5) * dx,
                     region.min.y + (static_cast<double>(r) + 0.5) * dy});
    }
  }
  return out;
}

/// Smallest box containing all points.
inline Box bounding_box(std::span<const Point2> points) {
  if (points.empty()) throw Error(ErrorCode::invalid_input, "bounding box of empty point list");
  Box box{points.front(), points.front()};
  for (const auto& p : points) {
    box.min.x = std::min(box.min.x, p.x);
    box.min.y = std::min(box.min.y, p.y);
    box.max.x = std::max(box.max.x, p.x);
    box.max.y = std::max(box.max.y, p.y);
  }
  return box;
}

}  // namespace bagrl::geometry
