#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>

namespace fruitnerf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Axis-aligned box. Valid boxes have min < max on every axis.
struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();

  static Aabb unit_cube() { return {}; }

  bool valid() const { return (min.array() < max.array()).all(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
};

// Slab test. Returns the parametric interval [t0, t1] of the segment of the
// line o + t d inside the box, with t0 clamped to >= 0; nullopt on a miss.
inline std::optional<std::pair<double, double>> intersect_box(const Aabb& box, const Vec3& o,
                                                              const Vec3& d) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < box.min[a] || o[a] > box.max[a]) return std::nullopt;
      continue;
    }
    const double inv = 1.0 / d[a];
    double ta = (box.min[a] - o[a]) * inv;
    double tb = (box.max[a] - o[a]) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 >= t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

// Ray/sphere intersection interval, clamped to t >= 0.
inline std::optional<std::pair<double, double>> intersect_sphere(const Vec3& center, double radius,
                                                                 const Vec3& o, const Vec3& d) {
  const Vec3 oc = o - center;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc <= 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  const double t0 = std::max(0.0, -b - s);
  const double t1 = -b + s;
  if (t1 <= t0) return std::nullopt;
  return std::make_pair(t0, t1);
}

}  // namespace fruitnerf
