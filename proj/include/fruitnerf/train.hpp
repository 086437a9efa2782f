#pragma once

#include "fruitnerf/field.hpp"
#include "fruitnerf/render.hpp"
#include "fruitnerf/scenegen.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fruitnerf {

struct TrainConfig {
  int iterations = 1500;
  int rays_per_batch = 4096;
  double learning_rate = 1e-2;
  // Learning rate of the raw density channel. Densities of opaque surfaces
  // sit tens of units above the init value, out of reach at the color rate.
  double density_learning_rate = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  int samples_per_ray = 128;
  // Rays stop once transmittance falls below this; 0 marches every sample.
  double min_transmittance = 1e-4;
  int grid_resolution = 128;
  Aabb bounds = Aabb::unit_cube();
  FieldGrid::Init init{};

  std::vector<std::string> diagnostics() const;
};

struct LossReport {
  double photometric = 0.0;
  double semantic = 0.0;
  double total = 0.0;
};

// Mean squared L2 color error over the batch.
double photometric_loss(std::span<const Vec3> predicted, std::span<const Vec3> target);
// Mean binary cross-entropy (negative log-likelihood); predictions are
// clamped to [1e-6, 1 - 1e-6].
double semantic_loss(std::span<const double> predicted, std::span<const double> target);

struct TrainingRay {
  Ray ray;  // already clipped to the grid bounds
  Vec3 target_rgb = Vec3::Zero();
  double target_mask = 0.0;
  std::uint64_t id = 0;  // keys the sample-jitter stream
};

struct LossTerms {
  bool photometric = true;
  bool semantic = true;
};

struct MarchOptions {
  int samples_per_ray = 128;
  bool jitter = true;
  std::uint64_t seed = 0;
  double min_transmittance = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Forward pass only; losses over the batch.
LossReport evaluate_loss(const FieldGrid& grid, std::span<const TrainingRay> batch,
                         const MarchOptions& options);

// Forward pass plus analytic reverse pass, accumulating into the grid's
// gradient buffers. The semantic loss reaches only the semantic channel;
// the photometric loss reaches only density and color. Disabled terms
// contribute neither loss nor gradient. Throws TrainingError naming the ray
// on non-finite intermediates.
LossReport forward_backward(FieldGrid& grid, std::span<const TrainingRay> batch,
                            const MarchOptions& options, LossTerms terms = {});

struct AdamState {
  std::vector<float> first_moment;
  std::vector<float> second_moment;
  long step = 0;
};

// One bias-corrected Adam update from the grid's gradient buffers.
void adam_step(FieldGrid& grid, AdamState& state, const TrainConfig& config);

// Training rays for the given (frame, pixel) indices, clipped to `bounds`;
// rays missing the box are kept with an empty interval.
std::vector<TrainingRay> make_rays(std::span<const PosedFrame> frames,
                                   std::span<const std::uint64_t> pixel_ids, const Aabb& bounds);

struct TrainResult {
  FieldGrid grid;
  std::vector<LossReport> losses;
};

using TrainProgress = std::function<void(int iteration, const LossReport&)>;

// Runs the sample / forward / loss / backward / step loop. Deterministic for
// a fixed config. Throws TrainingError if the loss becomes non-finite.
TrainResult train(std::span<const PosedFrame> frames, const TrainConfig& config,
                  const TrainProgress& progress = {});
// Continues training an existing grid.
std::vector<LossReport> train_grid(FieldGrid& grid, std::span<const PosedFrame> frames,
                                   const TrainConfig& config, const TrainProgress& progress = {});

void write_loss_csv(const std::filesystem::path& path, std::span<const LossReport> losses);

}  // namespace fruitnerf
