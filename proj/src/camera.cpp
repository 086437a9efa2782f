#include "fruitnerf/camera.hpp"

#include <stdexcept>

namespace fruitnerf {

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("camera focal length must be > 0");
  if (width < 1 || height < 1) throw std::invalid_argument("camera image size must be >= 1");
  const double err = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (err > 1e-9) throw std::invalid_argument("camera rotation is not orthonormal");
}

Camera look_at_camera(const Vec3& origin, const Vec3& target, double focal, int width, int height) {
  Camera cam;
  cam.fx = cam.fy = focal;
  cam.width = width;
  cam.height = height;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.translation = origin;

  const Vec3 back = (origin - target).normalized();  // camera +z
  Vec3 up_hint = Vec3::UnitZ();
  if (std::abs(back.dot(up_hint)) > 1.0 - 1e-9) up_hint = Vec3::UnitY();
  const Vec3 right = up_hint.cross(back).normalized();
  const Vec3 up = back.cross(right);
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = up;
  cam.rotation.col(2) = back;
  return cam;
}

}  // namespace fruitnerf
