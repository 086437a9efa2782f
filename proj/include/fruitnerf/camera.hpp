#pragma once

#include "fruitnerf/geometry.hpp"

#include <string>

namespace fruitnerf {

// Pinhole camera. The pose maps camera to world; the camera frame follows the
// OpenGL / transforms.json convention: +x right, +y up, looking down -z.
// Pixel (u, v) has v growing downward, so image row 0 is the top row.
struct Camera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 origin() const { return translation; }
  // World-space optical axis (unit).
  Vec3 forward() const { return -rotation.col(2); }

  Mat4 camera_to_world() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  // Throws std::invalid_argument naming the violated invariant.
  void validate() const;
};

// Builds a camera at `origin` looking at `target` with world +z as up.
Camera look_at_camera(const Vec3& origin, const Vec3& target, double focal, int width, int height);

}  // namespace fruitnerf
