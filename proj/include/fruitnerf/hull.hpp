#pragma once

#include "fruitnerf/geometry.hpp"

#include <array>
#include <span>
#include <vector>

namespace fruitnerf {

struct ConvexHull {
  // Indices into the input point array; faces wind counter-clockwise seen
  // from outside.
  std::vector<std::array<int, 3>> faces;
  std::vector<int> vertices;
  double volume = 0.0;
};

// 3-D quickhull. Sets with fewer than four points or no four non-coplanar
// points yield an empty hull with volume 0.
ConvexHull convex_hull(std::span<const Vec3> points);
double convex_hull_volume(std::span<const Vec3> points);

}  // namespace fruitnerf
