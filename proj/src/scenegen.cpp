#include "fruitnerf/scenegen.hpp"

#include "fruitnerf/field.hpp"
#include "fruitnerf/parallel.hpp"
#include "fruitnerf/rng.hpp"

#include "json.hpp"

#include <Eigen/SVD>

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace fruitnerf {
namespace {

using json = nlohmann::json;

constexpr double kGroupMinSeparation = 1.0;
constexpr double kGroupMaxSeparation = 1.6;

Vec3 uniform_in_ball(Rng& rng, const Vec3& center, double radius) {
  for (;;) {
    const Vec3 p(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    if (p.squaredNorm() <= 1.0) return center + radius * p;
  }
}

Vec3 uniform_direction(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {s * std::cos(phi), s * std::sin(phi), z};
}

// Hash-lattice value noise in [0, 1] with smoothstep interpolation.
double lattice_value(std::uint64_t seed, long x, long y, long z) {
  const std::uint64_t h = derive_seed(seed, static_cast<std::uint64_t>(x),
                                      static_cast<std::uint64_t>(y), static_cast<std::uint64_t>(z));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, const Vec3& p) {
  const Vec3 f = p.array().floor();
  const long x0 = static_cast<long>(f.x()), y0 = static_cast<long>(f.y()), z0 = static_cast<long>(f.z());
  Vec3 t = p - f;
  t = t.array() * t.array() * (3.0 - 2.0 * t.array());
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const double w = (dx ? t.x() : 1.0 - t.x()) * (dy ? t.y() : 1.0 - t.y()) * (dz ? t.z() : 1.0 - t.z());
    acc += w * lattice_value(seed, x0 + dx, y0 + dy, z0 + dz);
  }
  return acc;
}

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

const Vec3 kLightDirection = Vec3(0.3, 0.2, 0.93).normalized();

struct FoliageSample {
  double sigma = 0.0;
  double shade = 1.0;
};

FoliageSample foliage_at(const SceneSpec& spec, const Vec3& x) {
  const double rho = (x - spec.crown_center).norm() / spec.crown_radius;
  if (rho >= 1.0 || spec.foliage_density <= 0.0) return {};
  const double n = value_noise(spec.seed ^ 0xF01140Eull, x * spec.foliage_frequency);
  const double leaf = std::max(0.0, (n - spec.foliage_cutoff) / (1.0 - spec.foliage_cutoff));
  const double falloff = 1.0 - smoothstep(0.8, 1.0, rho);
  return {spec.foliage_density * leaf * falloff, 0.7 + 0.6 * n};
}

bool inside_trunk(const SceneSpec& spec, const Vec3& x) {
  const double dx = x.x() - spec.crown_center.x();
  const double dy = x.y() - spec.crown_center.y();
  return dx * dx + dy * dy <= spec.trunk_radius * spec.trunk_radius && x.z() >= spec.bounds.min.z() &&
         x.z() <= spec.crown_center.z();
}

Vec3 fruit_shade(const SceneSpec& spec, const Vec3& x, const Vec3& center) {
  const Vec3 d = x - center;
  const double len = d.norm();
  const double lambert = len > 0.0 ? std::max(0.0, d.dot(kLightDirection) / len) : 1.0;
  return spec.fruit_color * (0.45 + 0.55 * lambert);
}

// Evaluates the analytic field restricted to the given fruit candidates.
ScenePoint evaluate_with(const Scene& scene, const Vec3& x, const int* fruits, std::size_t n_fruits) {
  const SceneSpec& spec = scene.spec;
  ScenePoint out;
  Vec3 weighted = Vec3::Zero();
  const double r2 = spec.fruit_radius * spec.fruit_radius;
  for (std::size_t i = 0; i < n_fruits; ++i) {
    const Vec3& c = scene.fruit_centers[fruits[i]];
    if ((x - c).squaredNorm() <= r2) {
      out.fruit_sigma += spec.fruit_density;
      weighted += spec.fruit_density * fruit_shade(spec, x, c);
    }
  }
  if (inside_trunk(spec, x)) {
    out.sigma += spec.trunk_density;
    weighted += spec.trunk_density * spec.trunk_color;
  }
  const FoliageSample leaf = foliage_at(spec, x);
  if (leaf.sigma > 0.0) {
    out.sigma += leaf.sigma;
    weighted += leaf.sigma * (spec.foliage_color * leaf.shade).cwiseMin(1.0);
  }
  out.sigma += out.fruit_sigma;
  if (out.sigma > 0.0) out.color = weighted / out.sigma;
  return out;
}

std::optional<std::pair<double, double>> intersect_trunk(const SceneSpec& spec, const Vec3& o,
                                                         const Vec3& d) {
  const double ox = o.x() - spec.crown_center.x(), oy = o.y() - spec.crown_center.y();
  const double a = d.x() * d.x() + d.y() * d.y();
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  if (a > 0.0) {
    const double b = ox * d.x() + oy * d.y();
    const double c = ox * ox + oy * oy - spec.trunk_radius * spec.trunk_radius;
    const double disc = b * b - a * c;
    if (disc <= 0.0) return std::nullopt;
    const double s = std::sqrt(disc);
    t0 = std::max(t0, (-b - s) / a);
    t1 = std::min(t1, (-b + s) / a);
  } else if (ox * ox + oy * oy > spec.trunk_radius * spec.trunk_radius) {
    return std::nullopt;
  }
  const double zlo = spec.bounds.min.z(), zhi = spec.crown_center.z();
  if (d.z() != 0.0) {
    double ta = (zlo - o.z()) / d.z(), tb = (zhi - o.z()) / d.z();
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  } else if (o.z() < zlo || o.z() > zhi) {
    return std::nullopt;
  }
  if (t1 <= t0) return std::nullopt;
  return std::make_pair(t0, t1);
}

constexpr double kRenderMinTransmittance = 1e-6;

}  // namespace

std::vector<std::string> SceneSpec::diagnostics() const {
  std::vector<std::string> out;
  if (fruit_count < 0) out.push_back("fruit_count must be >= 0");
  if (!(fruit_radius > 0.0)) out.push_back("fruit_radius must be > 0");
  if (!(crown_radius > 0.0)) out.push_back("crown_radius must be > 0");
  if (!(cluster_fraction >= 0.0 && cluster_fraction <= 1.0)) out.push_back("cluster_fraction must be in [0, 1]");
  if (!(separation_factor > 2.0)) out.push_back("separation_factor must be > 2");
  if (!(trunk_radius >= 0.0)) out.push_back("trunk_radius must be >= 0");
  if (!(fruit_density > 0.0)) out.push_back("fruit_density must be > 0");
  if (!(trunk_density >= 0.0)) out.push_back("trunk_density must be >= 0");
  if (!(foliage_density >= 0.0)) out.push_back("foliage_density must be >= 0");
  if (!(foliage_frequency > 0.0)) out.push_back("foliage_frequency must be > 0");
  if (!(foliage_cutoff >= 0.0 && foliage_cutoff < 1.0)) out.push_back("foliage_cutoff must be in [0, 1)");
  if (!(render_step > 0.0)) out.push_back("render_step must be > 0");
  if (!bounds.valid()) {
    out.push_back("bounds must satisfy min < max on every axis");
  } else if (crown_radius > 0.0 && fruit_radius > 0.0) {
    const Vec3 reach = Vec3::Constant(crown_radius + fruit_radius);
    if (!bounds.contains(crown_center - reach) || !bounds.contains(crown_center + reach)) {
      out.push_back("crown sphere plus one fruit radius must lie inside bounds");
    }
  }
  return out;
}

Scene generate_scene(const SceneSpec& spec) {
  if (auto diag = spec.diagnostics(); !diag.empty()) {
    std::string msg = "invalid scene spec:";
    for (const auto& d : diag) msg += " " + d + ";";
    throw std::invalid_argument(msg);
  }
  Scene scene;
  scene.spec = spec;
  Rng rng(derive_seed(spec.seed, 0x5CE7E));

  const double r = spec.fruit_radius;
  const double crown_limit = spec.crown_radius;
  const double trunk_clear = spec.trunk_radius + r;

  auto admissible = [&](const Vec3& c) {
    if ((c - spec.crown_center).norm() > crown_limit) return false;
    const Vec3 reach = Vec3::Constant(r);
    if (!spec.bounds.contains(c - reach) || !spec.bounds.contains(c + reach)) return false;
    const double dx = c.x() - spec.crown_center.x(), dy = c.y() - spec.crown_center.y();
    if (c.z() < spec.crown_center.z() + r && dx * dx + dy * dy < trunk_clear * trunk_clear) return false;
    const double min_sep = spec.separation_factor * r;
    for (const auto& other : scene.fruit_centers) {
      if ((other - c).norm() <= min_sep) return false;
    }
    return true;
  };

  // Group sizes for the clustered share.
  int clustered = static_cast<int>(std::lround(spec.cluster_fraction * spec.fruit_count));
  std::vector<int> group_sizes;
  while (clustered >= 2) {
    int size = 2;
    if (clustered == 3 || clustered == 5) size = 3;
    else if (clustered > 5) size = rng.uniform() < 0.5 ? 2 : 3;
    group_sizes.push_back(size);
    clustered -= size;
  }
  int placed_in_groups = 0;
  for (int s : group_sizes) placed_in_groups += s;
  const int singles = spec.fruit_count - placed_in_groups;

  int group_id = 0;
  for (int size : group_sizes) {
    bool done = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !done; ++attempt) {
      std::vector<Vec3> members{uniform_in_ball(rng, spec.crown_center, crown_limit)};
      if (!admissible(members[0])) continue;
      for (int m = 1; m < size; ++m) {
        bool ok = false;
        for (int tries = 0; tries < 64 && !ok; ++tries) {
          const Vec3& anchor = members[rng.below(members.size())];
          const double dist = rng.uniform(kGroupMinSeparation, kGroupMaxSeparation) * r;
          const Vec3 c = anchor + dist * uniform_direction(rng);
          if (!admissible(c)) continue;
          ok = true;
          for (const auto& other : members) {
            const double sep = (other - c).norm() / r;
            if (sep < kGroupMinSeparation || sep > kGroupMaxSeparation) ok = false;
          }
          if (ok) members.push_back(c);
        }
        if (!ok) break;
      }
      if (static_cast<int>(members.size()) != size) continue;
      for (const auto& c : members) {
        scene.fruit_centers.push_back(c);
        scene.fruit_groups.push_back(group_id);
      }
      done = true;
    }
    if (!done) {
      throw PackingError("could not place a fruit group of " + std::to_string(size) + " after " +
                         std::to_string(kMaxPlacementAttempts) + " attempts");
    }
    ++group_id;
  }
  for (int i = 0; i < singles; ++i) {
    bool done = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !done; ++attempt) {
      const Vec3 c = uniform_in_ball(rng, spec.crown_center, crown_limit);
      if (!admissible(c)) continue;
      scene.fruit_centers.push_back(c);
      scene.fruit_groups.push_back(group_id++);
      done = true;
    }
    if (!done) {
      throw PackingError("could not place fruit " + std::to_string(scene.fruit_centers.size() + 1) +
                         " of " + std::to_string(spec.fruit_count) + " after " +
                         std::to_string(kMaxPlacementAttempts) + " attempts");
    }
  }
  return scene;
}

ScenePoint evaluate_scene(const Scene& scene, const Vec3& x) {
  std::vector<int> all(scene.fruit_centers.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return evaluate_with(scene, x, all.data(), all.size());
}

std::vector<Camera> sample_hemisphere_cameras(int n, double radius, const Vec3& look_at,
                                              std::uint64_t seed, const Intrinsics& intrinsics) {
  if (n < 1) throw std::invalid_argument("camera count must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("camera radius must be > 0");
  Rng rng(derive_seed(seed, 0xCA3E7A));
  std::vector<Camera> cams;
  cams.reserve(n);
  for (int i = 0; i < n; ++i) {
    // z uniform in [0, 1) is uniform in solid angle over the hemisphere.
    const double z = rng.uniform();
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double s = std::sqrt(1.0 - z * z);
    const Vec3 origin = look_at + radius * Vec3(s * std::cos(phi), s * std::sin(phi), z);
    cams.push_back(look_at_camera(origin, look_at, intrinsics.focal, intrinsics.width, intrinsics.height));
  }
  return cams;
}

PosedFrame render_frame(const Scene& scene, const Camera& camera) {
  camera.validate();
  const SceneSpec& spec = scene.spec;
  PosedFrame frame{camera, RgbImage(camera.width, camera.height), Mask(camera.width, camera.height)};
  const double h = spec.render_step;
  const Mat3& R = camera.rotation;

  parallel_for(static_cast<std::size_t>(camera.height), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    std::vector<int> hits;
    std::vector<std::pair<double, double>> spans;
    for (int x = 0; x < camera.width; ++x) {
      const Vec3 dir_cam((x + 0.5 - camera.cx) / camera.fx, -(y + 0.5 - camera.cy) / camera.fy, -1.0);
      const Vec3 d = (R * dir_cam).normalized();
      const Vec3& o = camera.translation;
      const auto box = intersect_box(spec.bounds, o, d);
      if (!box) continue;
      const double t_box0 = box->first, t_box1 = box->second;

      hits.clear();
      spans.clear();
      for (std::size_t f = 0; f < scene.fruit_centers.size(); ++f) {
        if (auto s = intersect_sphere(scene.fruit_centers[f], spec.fruit_radius, o, d)) {
          hits.push_back(static_cast<int>(f));
          spans.push_back(*s);
        }
      }
      if (spec.trunk_density > 0.0 && spec.trunk_radius > 0.0) {
        if (auto s = intersect_trunk(spec, o, d)) spans.push_back(*s);
      }
      if (spec.foliage_density > 0.0) {
        if (auto s = intersect_sphere(spec.crown_center, spec.crown_radius, o, d)) spans.push_back(*s);
      }
      if (spans.empty()) continue;
      std::sort(spans.begin(), spans.end());

      // Quadrature on the global grid t = t_box0 + (m + 0.5) h; samples outside
      // every primitive have zero density and do not change the composite.
      double transmittance = 1.0;
      Vec3 color = Vec3::Zero();
      double fruit_weight = 0.0;
      long last_m = -1;
      for (const auto& [a, b] : spans) {
        const double lo = std::max(a, t_box0), hi = std::min(b, t_box1);
        if (hi <= lo) continue;
        long m = std::max(last_m + 1, static_cast<long>(std::ceil((lo - t_box0) / h - 0.5)));
        for (; transmittance > kRenderMinTransmittance; ++m) {
          const double t = t_box0 + (m + 0.5) * h;
          if (t > hi || t > t_box1) break;
          const ScenePoint p = evaluate_with(scene, o + t * d, hits.data(), hits.size());
          last_m = m;
          if (p.sigma <= 0.0) continue;
          const double alpha = -std::expm1(-p.sigma * h);
          const double w = transmittance * alpha;
          color += w * p.color;
          fruit_weight += w * (p.fruit_sigma / p.sigma);
          transmittance *= 1.0 - alpha;
        }
      }
      float* px = frame.rgb.at(x, y);
      for (int c = 0; c < 3; ++c) px[c] = static_cast<float>(std::clamp(color[c], 0.0, 1.0));
      frame.mask.at(x, y) = fruit_weight > 0.5 ? 1 : 0;
    }
  });
  return frame;
}

std::vector<PosedFrame> render_frames(const Scene& scene, const std::vector<Camera>& cameras) {
  std::vector<PosedFrame> frames;
  frames.reserve(cameras.size());
  for (const auto& cam : cameras) frames.push_back(render_frame(scene, cam));
  return frames;
}

void voxelize_scene(const Scene& scene, FieldGrid& grid) {
  const auto& res = grid.resolution();
  constexpr double kEps = 1e-4;
  parallel_for(static_cast<std::size_t>(res.nz), [&](std::size_t kz) {
    const int k = static_cast<int>(kz);
    for (int j = 0; j < res.ny; ++j) {
      for (int i = 0; i < res.nx; ++i) {
        const Vec3 x = grid.node_position(i, j, k);
        const ScenePoint p = evaluate_scene(scene, x);
        Vec3 color = p.color;
        double frac = p.sigma > 0.0 ? p.fruit_sigma / p.sigma : 0.0;
        if (p.sigma == 0.0) {
          // Empty nodes borrow color and semantics from the densest axis
          // neighbor so interpolation across a surface keeps its color.
          double best = 0.0;
          for (int a = 0; a < 6; ++a) {
            Vec3 y = x;
            y[a / 2] += (a % 2 ? 1.0 : -1.0) * grid.spacing()[a / 2];
            const ScenePoint q = evaluate_scene(scene, y);
            if (q.sigma > best) {
              best = q.sigma;
              color = q.color;
              frac = q.fruit_sigma / q.sigma;
            }
          }
        }
        const std::size_t n = grid.node_index(i, j, k);
        grid.raw(n, Channel::density) = static_cast<float>(softplus_inverse(std::max(p.sigma, 1e-6)));
        for (int c = 0; c < 3; ++c) {
          grid.raw(n, static_cast<Channel>(1 + c)) = static_cast<float>(logit(std::clamp(color[c], kEps, 1.0 - kEps)));
        }
        grid.raw(n, Channel::semantic) = static_cast<float>(logit(std::clamp(frac, kEps, 1.0 - kEps)));
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Mask corruption

MaskCorruption parse_mask_corruption(const std::string& name) {
  if (name == "soft_edges") return MaskCorruption::soft_edges;
  if (name == "dropout") return MaskCorruption::dropout;
  if (name == "dilate_erode") return MaskCorruption::dilate_erode;
  throw std::invalid_argument("unknown mask corruption mode '" + name + "'");
}

std::string to_string(MaskCorruption mode) {
  switch (mode) {
    case MaskCorruption::soft_edges: return "soft_edges";
    case MaskCorruption::dropout: return "dropout";
    case MaskCorruption::dilate_erode: return "dilate_erode";
  }
  return "unknown";
}

namespace {

// 8-connected component labels (0 = background, blobs numbered from 1 in
// raster order of their first pixel).
std::vector<int> label_blobs(const Mask& mask, int& blob_count) {
  std::vector<int> labels(mask.data.size(), 0);
  blob_count = 0;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y) || labels[static_cast<size_t>(y) * mask.width + x]) continue;
      const int id = ++blob_count;
      labels[static_cast<size_t>(y) * mask.width + x] = id;
      stack.emplace_back(x, y);
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height) continue;
            const size_t idx = static_cast<size_t>(ny) * mask.width + nx;
            if (mask.data[idx] && !labels[idx]) {
              labels[idx] = id;
              stack.emplace_back(nx, ny);
            }
          }
        }
      }
    }
  }
  return labels;
}

// Dilates (radius > 0) or erodes (radius < 0) the pixels where `in(x, y)`
// holds, with a Euclidean disk, writing set pixels into `out`.
template <typename Pred>
void morph(int width, int height, Pred in, int radius, int x0, int y0, int x1, int y1, Mask& out) {
  const int r = std::abs(radius);
  x0 = std::max(0, x0 - (radius > 0 ? r : 0));
  y0 = std::max(0, y0 - (radius > 0 ? r : 0));
  x1 = std::min(width - 1, x1 + (radius > 0 ? r : 0));
  y1 = std::min(height - 1, y1 + (radius > 0 ? r : 0));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      bool value;
      if (radius == 0) {
        value = in(x, y);
      } else if (radius > 0) {
        value = false;
        for (int dy = -r; dy <= r && !value; ++dy) {
          for (int dx = -r; dx <= r && !value; ++dx) {
            if (dx * dx + dy * dy > r * r) continue;
            const int nx = x + dx, ny = y + dy;
            if (nx >= 0 && ny >= 0 && nx < width && ny < height && in(nx, ny)) value = true;
          }
        }
      } else {
        value = in(x, y);
        for (int dy = -r; dy <= r && value; ++dy) {
          for (int dx = -r; dx <= r && value; ++dx) {
            if (dx * dx + dy * dy > r * r) continue;
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= width || ny >= height || !in(nx, ny)) value = false;
          }
        }
      }
      if (value) out.at(x, y) = 1;
    }
  }
}

}  // namespace

std::vector<PosedFrame> corrupt_masks(std::vector<PosedFrame> frames, MaskCorruption mode,
                                      double magnitude, std::uint64_t seed, CorruptionStats* stats) {
  if (!(magnitude >= 0.0)) throw std::invalid_argument("corruption magnitude must be >= 0");
  if (mode == MaskCorruption::dropout && magnitude > 1.0) {
    throw std::invalid_argument("dropout magnitude is a probability and must be <= 1");
  }
  CorruptionStats local;
  const int max_radius = static_cast<int>(std::floor(magnitude));
  for (std::size_t f = 0; f < frames.size(); ++f) {
    Mask& mask = frames[f].mask;
    Rng rng(derive_seed(seed, f, static_cast<std::uint64_t>(mode)));
    if (mode == MaskCorruption::dilate_erode) {
      if (max_radius == 0) continue;
      const int radius = static_cast<int>(rng.below(2 * max_radius + 1)) - max_radius;
      Mask out(mask.width, mask.height);
      morph(mask.width, mask.height, [&](int x, int y) { return mask.at(x, y) != 0; }, radius, 0, 0,
            mask.width - 1, mask.height - 1, out);
      mask = std::move(out);
      continue;
    }
    int blob_count = 0;
    const std::vector<int> labels = label_blobs(mask, blob_count);
    local.blobs += blob_count;
    if (mode == MaskCorruption::dropout) {
      std::vector<char> drop(blob_count + 1, 0);
      for (int b = 1; b <= blob_count; ++b) {
        drop[b] = rng.uniform() < magnitude;
        local.removed += drop[b];
      }
      for (std::size_t i = 0; i < mask.data.size(); ++i) {
        if (labels[i] && drop[labels[i]]) mask.data[i] = 0;
      }
      continue;
    }
    // soft_edges
    if (max_radius == 0) continue;
    std::vector<std::array<int, 4>> bbox(blob_count + 1, {mask.width, mask.height, -1, -1});
    for (int y = 0; y < mask.height; ++y) {
      for (int x = 0; x < mask.width; ++x) {
        const int id = labels[static_cast<size_t>(y) * mask.width + x];
        if (!id) continue;
        auto& b = bbox[id];
        b = {std::min(b[0], x), std::min(b[1], y), std::max(b[2], x), std::max(b[3], y)};
      }
    }
    Mask out(mask.width, mask.height);
    for (int b = 1; b <= blob_count; ++b) {
      const int radius = static_cast<int>(rng.below(2 * max_radius + 1)) - max_radius;
      auto in_blob = [&](int x, int y) { return labels[static_cast<size_t>(y) * mask.width + x] == b; };
      morph(mask.width, mask.height, in_blob, radius, bbox[b][0], bbox[b][1], bbox[b][2], bbox[b][3], out);
    }
    mask = std::move(out);
  }
  if (stats) *stats = local;
  return frames;
}

// ---------------------------------------------------------------------------
// Dataset I/O

namespace {

std::string frame_name(std::size_t i) {
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << i << ".png";
  return os.str();
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const std::vector<PosedFrame>& frames) {
  if (frames.empty()) throw std::invalid_argument("no frames to write");
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  const Camera& c0 = frames.front().camera;
  json doc;
  doc["fl_x"] = c0.fx;
  doc["fl_y"] = c0.fy;
  doc["cx"] = c0.cx;
  doc["cy"] = c0.cy;
  doc["w"] = c0.width;
  doc["h"] = c0.height;
  doc["frames"] = json::array();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.camera.fx != c0.fx || f.camera.fy != c0.fy || f.camera.width != c0.width ||
        f.camera.height != c0.height || f.camera.cx != c0.cx || f.camera.cy != c0.cy) {
      throw std::invalid_argument("all frames must share one set of intrinsics");
    }
    const std::string name = frame_name(i);
    write_png_rgb(dir / "images" / name, f.rgb);
    write_png_mask(dir / "masks" / name, f.mask);
    const Mat4 m = f.camera.camera_to_world();
    json rows = json::array();
    for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
    doc["frames"].push_back({{"file_path", "images/" + name}, {"mask_path", "masks/" + name},
                             {"transform_matrix", rows}});
  }
  write_json(dir / "transforms.json", doc);
}

std::vector<PosedFrame> read_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "transforms.json");
  if (!in) throw std::runtime_error("cannot open " + (dir / "transforms.json").string());
  const json doc = json::parse(in);
  Camera base;
  base.fx = doc.at("fl_x").get<double>();
  base.fy = doc.at("fl_y").get<double>();
  base.cx = doc.at("cx").get<double>();
  base.cy = doc.at("cy").get<double>();
  base.width = doc.at("w").get<int>();
  base.height = doc.at("h").get<int>();
  std::vector<PosedFrame> frames;
  for (const auto& fj : doc.at("frames")) {
    PosedFrame f;
    f.camera = base;
    const auto& rows = fj.at("transform_matrix");
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) f.camera.rotation(r, c) = rows.at(r).at(c).get<double>();
      f.camera.translation[r] = rows.at(r).at(3).get<double>();
    }
    // Undo float noise from the text round trip.
    Eigen::JacobiSVD<Mat3> svd(f.camera.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    f.camera.rotation = svd.matrixU() * svd.matrixV().transpose();
    f.camera.validate();
    f.rgb = read_png_rgb(dir / fj.at("file_path").get<std::string>());
    f.mask = read_png_mask(dir / fj.at("mask_path").get<std::string>());
    if (f.rgb.width != base.width || f.rgb.height != base.height || f.mask.width != base.width ||
        f.mask.height != base.height) {
      throw std::runtime_error("frame " + fj.at("file_path").get<std::string>() +
                               " does not match the camera size");
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

void write_ground_truth(const std::filesystem::path& path, const Scene& scene) {
  json doc;
  doc["count"] = scene.fruit_centers.size();
  doc["radius"] = scene.spec.fruit_radius;
  doc["centers"] = json::array();
  for (const auto& c : scene.fruit_centers) doc["centers"].push_back({c.x(), c.y(), c.z()});
  doc["groups"] = scene.fruit_groups;
  write_json(path, doc);
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const json doc = json::parse(in);
  GroundTruth gt;
  gt.radius = doc.at("radius").get<double>();
  for (const auto& c : doc.at("centers")) gt.centers.emplace_back(c.at(0), c.at(1), c.at(2));
  if (gt.centers.size() != doc.at("count").get<std::size_t>()) {
    throw std::runtime_error(path.string() + ": count does not match the number of centers");
  }
  return gt;
}

}  // namespace fruitnerf
