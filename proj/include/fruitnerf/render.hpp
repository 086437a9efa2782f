#pragma once

#include "fruitnerf/camera.hpp"
#include "fruitnerf/field.hpp"
#include "fruitnerf/geometry.hpp"

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace fruitnerf {

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = -Vec3::UnitZ();
  double t_near = 0.0;
  double t_far = 1.0;

  Vec3 at(double t) const { return origin + t * direction; }
};

// Ray through continuous pixel coordinates (u + jitter_u, v + jitter_v);
// pixel (i, j) spans [i, i+1) x [j, j+1), so its center is (i+0.5, j+0.5).
// t_near/t_far are left at [0, inf) and set by clip_to_box. Throws
// std::out_of_range if (u, v) lies outside the image.
Ray generate_ray(const Camera& camera, double u, double v, double jitter_u = 0.0,
                 double jitter_v = 0.0);

// Clips a ray to the box; false when the ray misses it.
bool clip_to_box(Ray& ray, const Aabb& box);

struct RaySamples {
  std::vector<double> t;
  std::vector<double> delta;
};

// One sample per equal sub-interval of [t_near, t_far]; bin midpoints when
// jitter is disabled, otherwise uniform within each bin drawn from `seed`.
RaySamples stratified_samples(const Ray& ray, int count, std::uint64_t seed, bool jitter = true);

struct CompositeWeights {
  // Transmittance before each sample, T(t_k).
  std::vector<double> transmittance;
  std::vector<double> weights;
  double opacity = 0.0;
};

class RenderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quadrature weights w_k = T(t_k) (1 - exp(-sigma_k delta_k)) with
// T(t_k) = exp(-sum_{a<k} sigma_a delta_a). Throws RenderError on a
// non-finite or negative density.
CompositeWeights composite_weights(std::span<const double> sigma, std::span<const double> delta);

struct Composite {
  double value = 0.0;
  CompositeWeights weights;
};
Composite composite(std::span<const double> sigma, std::span<const double> values,
                    std::span<const double> delta);

inline constexpr double kProbabilityClamp = 1e-6;
inline double clamp_probability(double p) {
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

struct PixelRender {
  Vec3 color = Vec3::Zero();
  // Accumulated fruit probability (clamped) and its logit.
  double semantic = kProbabilityClamp;
  double semantic_logit = 0.0;
  double opacity = 0.0;
};

struct RenderOptions {
  int samples_per_ray = 128;
  bool jitter = true;
  std::uint64_t seed = 0;
};

// Renders one pixel center of `camera` against the grid. Semantics are
// accumulated in probability space with the color weights.
PixelRender render_pixel(const FieldGrid& grid, const Camera& camera, int px, int py,
                         const RenderOptions& options = {});
// Same for an explicit ray; ray_id keys the jitter stream.
PixelRender render_ray(const FieldGrid& grid, Ray ray, std::uint64_t ray_id,
                       const RenderOptions& options);

}  // namespace fruitnerf
