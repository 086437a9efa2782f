#include "fruitnerf/train.hpp"

#include "fruitnerf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fruitnerf {

std::vector<std::string> TrainConfig::diagnostics() const {
  std::vector<std::string> out;
  if (iterations < 0) out.push_back("iterations must be >= 0");
  if (rays_per_batch < 1) out.push_back("rays_per_batch must be >= 1");
  if (!(learning_rate > 0.0)) out.push_back("learning_rate must be > 0");
  if (!(density_learning_rate > 0.0)) out.push_back("density_learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) out.push_back("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) out.push_back("beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) out.push_back("epsilon must be > 0");
  if (samples_per_ray < 1) out.push_back("samples_per_ray must be >= 1");
  if (!(min_transmittance >= 0.0 && min_transmittance < 1.0)) out.push_back("min_transmittance must be in [0, 1)");
  if (grid_resolution < 2) out.push_back("grid_resolution must be >= 2");
  if (!bounds.valid()) out.push_back("bounds must satisfy min < max on every axis");
  return out;
}

double photometric_loss(std::span<const Vec3> predicted, std::span<const Vec3> target) {
  if (predicted.size() != target.size()) throw std::invalid_argument("batch sizes differ");
  if (predicted.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += (target[i] - predicted[i]).squaredNorm();
  return sum / static_cast<double>(predicted.size());
}

namespace {

double bce(double target, double predicted) {
  const double p = clamp_probability(predicted);
  return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

// Per-sample record kept between the forward and reverse pass of one ray.
struct SampleRecord {
  TrilinearStencil stencil;
  double delta;
  double dsigma_draw;  // softplus'(raw density)
  Vec3 color;
  Vec3 dcolor_draw;    // sigmoid'(raw rgb)
  double prob;
  double dprob_draw;   // sigmoid'(raw semantic)
  double weight;
  double transmittance_after;
};

struct RayForward {
  Vec3 color = Vec3::Zero();
  double semantic = 0.0;  // unclamped accumulated probability
  std::size_t used = 0;
};

RayForward march(const FieldGrid& grid, const TrainingRay& tr, const MarchOptions& opt,
                 std::vector<SampleRecord>& records) {
  RayForward out;
  records.clear();
  const Ray& ray = tr.ray;
  if (!(ray.t_near < ray.t_far)) return out;
  const RaySamples samples =
      stratified_samples(ray, opt.samples_per_ray, derive_seed(opt.seed, tr.id), opt.jitter);
  double transmittance = 1.0;
  for (std::size_t k = 0; k < samples.t.size(); ++k) {
    const auto st = grid.stencil(ray.at(samples.t[k]));
    if (!st) continue;  // rounding at the box faces
    const auto raw = grid.interpolate_raw(*st);
    SampleRecord r;
    r.stencil = *st;
    r.delta = samples.delta[k];
    const double sigma = softplus(raw[0]);
    r.dsigma_draw = sigmoid(raw[0]);
    for (int c = 0; c < 3; ++c) {
      r.color[c] = sigmoid(raw[1 + c]);
      r.dcolor_draw[c] = r.color[c] * (1.0 - r.color[c]);
    }
    r.prob = sigmoid(raw[4]);
    r.dprob_draw = r.prob * (1.0 - r.prob);
    const double decay = std::exp(-sigma * r.delta);
    r.weight = transmittance * (1.0 - decay);
    transmittance *= decay;
    r.transmittance_after = transmittance;
    out.color += r.weight * r.color;
    out.semantic += r.weight * r.prob;
    records.push_back(r);
    if (transmittance < opt.min_transmittance) break;
  }
  out.used = records.size();
  return out;
}

void check_finite(double v, const TrainingRay& tr, const char* what) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "non-finite " << what << " on ray " << tr.id;
    throw TrainingError(os.str());
  }
}

}  // namespace

double semantic_loss(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size()) throw std::invalid_argument("batch sizes differ");
  if (predicted.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += bce(target[i], predicted[i]);
  return sum / static_cast<double>(predicted.size());
}

LossReport evaluate_loss(const FieldGrid& grid, std::span<const TrainingRay> batch,
                         const MarchOptions& options) {
  std::vector<SampleRecord> records;
  LossReport rep;
  if (batch.empty()) return rep;
  for (const auto& tr : batch) {
    const RayForward f = march(grid, tr, options, records);
    rep.photometric += (tr.target_rgb - f.color).squaredNorm();
    rep.semantic += bce(tr.target_mask, f.semantic);
  }
  rep.photometric /= static_cast<double>(batch.size());
  rep.semantic /= static_cast<double>(batch.size());
  rep.total = rep.photometric + rep.semantic;
  return rep;
}

LossReport forward_backward(FieldGrid& grid, std::span<const TrainingRay> batch,
                            const MarchOptions& options, LossTerms terms) {
  LossReport rep;
  if (batch.empty()) return rep;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<SampleRecord> records;
  float* grads = grid.gradients().data();

  for (const auto& tr : batch) {
    const RayForward f = march(grid, tr, options, records);
    const double photo = (tr.target_rgb - f.color).squaredNorm();
    const double p_hat = clamp_probability(f.semantic);
    const double sem = bce(tr.target_mask, f.semantic);
    check_finite(photo, tr, "photometric loss");
    check_finite(sem, tr, "semantic loss");
    if (terms.photometric) rep.photometric += photo;
    if (terms.semantic) rep.semantic += sem;
    if (records.empty()) continue;

    const Vec3 g_color = terms.photometric ? Vec3(2.0 * inv_n * (f.color - tr.target_rgb)) : Vec3::Zero();
    double g_sem = 0.0;
    // The clamp has zero derivative outside (1e-6, 1 - 1e-6).
    if (terms.semantic && f.semantic > kProbabilityClamp && f.semantic < 1.0 - kProbabilityClamp) {
      const double p = tr.target_mask;
      g_sem = inv_n * (-p / p_hat + (1.0 - p) / (1.0 - p_hat));
    }
    check_finite(g_sem, tr, "semantic gradient");

    // Color composited beyond sample k, C - C_{<=k}.
    const double g_dot_total = g_color.dot(f.color);
    double g_dot_prefix = 0.0;
    for (const SampleRecord& r : records) {
      const double g_dot_c = g_color.dot(r.color);
      g_dot_prefix += r.weight * g_dot_c;
      double g[kChannels];
      // d C / d sigma_k = delta_k (T_{k+1} c_k - (C - C_{<=k})); semantics
      // never reach the density channel.
      const double g_sigma = r.delta * (r.transmittance_after * g_dot_c - (g_dot_total - g_dot_prefix));
      g[0] = g_sigma * r.dsigma_draw;
      for (int c = 0; c < 3; ++c) g[1 + c] = g_color[c] * r.weight * r.dcolor_draw[c];
      g[4] = g_sem * r.weight * r.dprob_draw;
      check_finite(g[0], tr, "density gradient");
      for (int c = 0; c < 8; ++c) {
        float* dst = grads + static_cast<std::size_t>(r.stencil.node[c]) * kChannels;
        const double w = r.stencil.weight[c];
        for (int ch = 0; ch < kChannels; ++ch) dst[ch] += static_cast<float>(w * g[ch]);
      }
    }
  }
  rep.photometric *= inv_n;
  rep.semantic *= inv_n;
  rep.total = rep.photometric + rep.semantic;
  return rep;
}

void adam_step(FieldGrid& grid, AdamState& state, const TrainConfig& config) {
  auto params = grid.parameters();
  const auto grads = grid.gradients();
  if (state.first_moment.size() != params.size()) {
    state.first_moment.assign(params.size(), 0.0f);
    state.second_moment.assign(params.size(), 0.0f);
    state.step = 0;
  }
  ++state.step;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const float fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
  const float eps = static_cast<float>(config.epsilon);
  const float inv_c1 = static_cast<float>(1.0 / c1), inv_c2 = static_cast<float>(1.0 / c2);
  float lr[kChannels];
  lr[0] = static_cast<float>(config.density_learning_rate);
  for (int ch = 1; ch < kChannels; ++ch) lr[ch] = static_cast<float>(config.learning_rate);

  float* m = state.first_moment.data();
  float* v = state.second_moment.data();
  const std::size_t nodes = params.size() / kChannels;
  for (std::size_t n = 0; n < nodes; ++n) {
    for (int ch = 0; ch < kChannels; ++ch) {
      const std::size_t i = n * kChannels + ch;
      const float g = grads[i];
      m[i] = fb1 * m[i] + (1.0f - fb1) * g;
      v[i] = fb2 * v[i] + (1.0f - fb2) * g * g;
      const float m_hat = m[i] * inv_c1;
      const float v_hat = v[i] * inv_c2;
      params[i] -= lr[ch] * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

std::vector<TrainingRay> make_rays(std::span<const PosedFrame> frames,
                                   std::span<const std::uint64_t> pixel_ids, const Aabb& bounds) {
  std::vector<std::uint64_t> offsets(frames.size() + 1, 0);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    offsets[f + 1] = offsets[f] + static_cast<std::uint64_t>(frames[f].camera.width) * frames[f].camera.height;
  }
  std::vector<TrainingRay> rays;
  rays.reserve(pixel_ids.size());
  for (const std::uint64_t id : pixel_ids) {
    if (id >= offsets.back()) throw std::out_of_range("pixel id beyond the frame set");
    const std::size_t f = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), id) - offsets.begin() - 1);
    const PosedFrame& frame = frames[f];
    const std::uint64_t local = id - offsets[f];
    const int x = static_cast<int>(local % frame.camera.width);
    const int y = static_cast<int>(local / frame.camera.width);
    TrainingRay tr;
    tr.id = id;
    tr.ray = generate_ray(frame.camera, x + 0.5, y + 0.5);
    if (!clip_to_box(tr.ray, bounds)) tr.ray.t_near = tr.ray.t_far = 0.0;
    const float* px = frame.rgb.at(x, y);
    tr.target_rgb = Vec3(px[0], px[1], px[2]);
    tr.target_mask = frame.mask.at(x, y) ? 1.0 : 0.0;
    rays.push_back(tr);
  }
  return rays;
}

std::vector<LossReport> train_grid(FieldGrid& grid, std::span<const PosedFrame> frames,
                                   const TrainConfig& config, const TrainProgress& progress) {
  if (auto diag = config.diagnostics(); !diag.empty()) {
    throw std::invalid_argument("invalid train config: " + diag.front());
  }
  std::vector<LossReport> losses;
  if (config.iterations == 0) return losses;
  if (frames.empty()) throw std::invalid_argument("training needs at least one frame");
  std::uint64_t total_pixels = 0;
  for (const auto& f : frames) {
    for (auto v : f.mask.data) {
      if (v > 1) throw std::invalid_argument("training masks must be binary");
    }
    total_pixels += static_cast<std::uint64_t>(f.camera.width) * f.camera.height;
  }

  AdamState adam;
  Rng rng(derive_seed(config.seed, 0xBA7C4));
  std::vector<std::uint64_t> ids(config.rays_per_batch);
  MarchOptions march_opt;
  march_opt.samples_per_ray = config.samples_per_ray;
  march_opt.jitter = true;
  march_opt.min_transmittance = config.min_transmittance;
  losses.reserve(config.iterations);

  for (int it = 0; it < config.iterations; ++it) {
    for (auto& id : ids) id = rng.below(total_pixels);
    const std::vector<TrainingRay> batch = make_rays(frames, ids, grid.bounds());
    grid.zero_gradients();
    march_opt.seed = derive_seed(config.seed, 0x5A3B1E, static_cast<std::uint64_t>(it));
    const LossReport rep = forward_backward(grid, batch, march_opt);
    if (!std::isfinite(rep.total)) {
      throw TrainingError("training diverged at iteration " + std::to_string(it + 1));
    }
    adam_step(grid, adam, config);
    losses.push_back(rep);
    if (progress) progress(it + 1, rep);
  }
  return losses;
}

TrainResult train(std::span<const PosedFrame> frames, const TrainConfig& config,
                  const TrainProgress& progress) {
  FieldGrid grid(GridResolution::cube(config.grid_resolution), config.bounds, config.init);
  auto losses = train_grid(grid, frames, config, progress);
  return {std::move(grid), std::move(losses)};
}

void write_loss_csv(const std::filesystem::path& path, std::span<const LossReport> losses) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iteration,l_photo,l_sem,l_total\n";
  out << std::setprecision(9);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out << (i + 1) << "," << losses[i].photometric << "," << losses[i].semantic << "," << losses[i].total << "\n";
  }
}

}  // namespace fruitnerf
