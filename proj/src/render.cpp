#include "fruitnerf/render.hpp"

#include "fruitnerf/rng.hpp"

#include <cmath>
#include <string>

namespace fruitnerf {

Ray generate_ray(const Camera& camera, double u, double v, double jitter_u, double jitter_v) {
  if (!(u >= 0.0 && u <= camera.width && v >= 0.0 && v <= camera.height)) {
    throw std::out_of_range("pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                            ") outside the image");
  }
  const double pu = u + jitter_u, pv = v + jitter_v;
  const Vec3 dir_cam((pu - camera.cx) / camera.fx, -(pv - camera.cy) / camera.fy, -1.0);
  Ray ray;
  ray.origin = camera.translation;
  ray.direction = (camera.rotation * dir_cam).normalized();
  ray.t_near = 0.0;
  ray.t_far = std::numeric_limits<double>::infinity();
  return ray;
}

bool clip_to_box(Ray& ray, const Aabb& box) {
  const auto hit = intersect_box(box, ray.origin, ray.direction);
  if (!hit) return false;
  ray.t_near = std::max(ray.t_near, hit->first);
  ray.t_far = std::min(ray.t_far, hit->second);
  return ray.t_near < ray.t_far;
}

RaySamples stratified_samples(const Ray& ray, int count, std::uint64_t seed, bool jitter) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  if (!(ray.t_near < ray.t_far) || !std::isfinite(ray.t_far)) {
    throw std::invalid_argument("ray interval must be finite with t_near < t_far");
  }
  RaySamples out;
  out.t.resize(count);
  out.delta.resize(count);
  const double bin = (ray.t_far - ray.t_near) / count;
  Rng rng(seed);
  for (int k = 0; k < count; ++k) {
    const double offset = jitter ? rng.uniform() : 0.5;
    out.t[k] = ray.t_near + (k + offset) * bin;
  }
  for (int k = 0; k + 1 < count; ++k) out.delta[k] = out.t[k + 1] - out.t[k];
  out.delta[count - 1] = ray.t_far - out.t[count - 1];
  return out;
}

CompositeWeights composite_weights(std::span<const double> sigma, std::span<const double> delta) {
  if (sigma.size() != delta.size()) throw std::invalid_argument("sigma and delta sizes differ");
  CompositeWeights out;
  out.transmittance.resize(sigma.size());
  out.weights.resize(sigma.size());
  double optical_depth = 0.0;
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    if (!std::isfinite(sigma[k]) || sigma[k] < 0.0) {
      throw RenderError("invalid density " + std::to_string(sigma[k]) + " at sample " + std::to_string(k));
    }
    const double t = std::exp(-optical_depth);
    const double alpha = -std::expm1(-sigma[k] * delta[k]);
    out.transmittance[k] = t;
    out.weights[k] = t * alpha;
    out.opacity += out.weights[k];
    optical_depth += sigma[k] * delta[k];
  }
  return out;
}

Composite composite(std::span<const double> sigma, std::span<const double> values,
                    std::span<const double> delta) {
  if (values.size() != sigma.size()) throw std::invalid_argument("sigma and value sizes differ");
  Composite out;
  out.weights = composite_weights(sigma, delta);
  for (std::size_t k = 0; k < values.size(); ++k) out.value += out.weights.weights[k] * values[k];
  return out;
}

PixelRender render_ray(const FieldGrid& grid, Ray ray, std::uint64_t ray_id, const RenderOptions& options) {
  PixelRender out;
  out.semantic_logit = logit(out.semantic);
  if (!clip_to_box(ray, grid.bounds())) return out;
  const RaySamples samples =
      stratified_samples(ray, options.samples_per_ray, derive_seed(options.seed, ray_id), options.jitter);
  const std::size_t n = samples.t.size();
  std::vector<double> sigma(n), prob(n);
  std::vector<Vec3> color(n);
  for (std::size_t k = 0; k < n; ++k) {
    const FieldSample s = grid.query(ray.at(samples.t[k]));
    sigma[k] = s.sigma;
    color[k] = s.color;
    prob[k] = s.semantic_probability();
  }
  const CompositeWeights w = composite_weights(sigma, samples.delta);
  double sem = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    out.color += w.weights[k] * color[k];
    sem += w.weights[k] * prob[k];
  }
  out.opacity = w.opacity;
  out.semantic = clamp_probability(sem);
  out.semantic_logit = logit(out.semantic);
  return out;
}

PixelRender render_pixel(const FieldGrid& grid, const Camera& camera, int px, int py,
                         const RenderOptions& options) {
  if (px < 0 || py < 0 || px >= camera.width || py >= camera.height) {
    throw std::out_of_range("pixel outside the image");
  }
  const Ray ray = generate_ray(camera, px + 0.5, py + 0.5);
  return render_ray(grid, ray, static_cast<std::uint64_t>(py) * camera.width + px, options);
}

}  // namespace fruitnerf
