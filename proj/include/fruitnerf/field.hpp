#pragma once

#include "fruitnerf/geometry.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace fruitnerf {

// Raw (pre-activation) channels stored per voxel node.
enum class Channel : int { density = 0, red = 1, green = 2, blue = 3, semantic = 4 };
inline constexpr int kChannels = 5;

inline double softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double softplus_inverse(double y) { return y > 20.0 ? y : std::log(std::expm1(y)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Activation and its derivative for a channel, both evaluated at a raw value.
double activate(Channel ch, double raw);
double activation_derivative(Channel ch, double raw);

struct FieldSample {
  Vec3 position = Vec3::Zero();
  double sigma = 0.0;
  Vec3 color = Vec3::Zero();
  double semantic_logit = -std::numeric_limits<double>::infinity();

  double semantic_probability() const { return sigmoid(semantic_logit); }
};

// The 8 grid nodes surrounding a point and their trilinear weights.
struct TrilinearStencil {
  std::array<std::uint32_t, 8> node{};
  std::array<double, 8> weight{};
};

struct GridResolution {
  int nx = 128;
  int ny = 128;
  int nz = 128;

  static GridResolution cube(int n) { return {n, n, n}; }
  std::size_t nodes() const { return static_cast<std::size_t>(nx) * ny * nz; }
};

// Dense node-centered voxel grid over an axis-aligned box. Node (i, j, k)
// sits at bounds.min + (i, j, k) * spacing, so nodes span the box including
// its faces. Storage is x-fastest, channels interleaved per node.
class FieldGrid {
 public:
  struct Init {
    double raw_density = -4.0;
    double raw_semantic = -4.0;
    double raw_rgb = 0.0;
  };

  // Throws std::invalid_argument for a resolution below 2 on any axis or an
  // empty box.
  FieldGrid(GridResolution resolution, const Aabb& bounds, Init init);
  FieldGrid(GridResolution resolution, const Aabb& bounds) : FieldGrid(resolution, bounds, Init{}) {}

  const GridResolution& resolution() const { return res_; }
  const Aabb& bounds() const { return bounds_; }
  Vec3 spacing() const { return spacing_; }

  std::size_t node_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * res_.ny + j) * res_.nx + i;
  }
  Vec3 node_position(int i, int j, int k) const {
    return bounds_.min + Vec3(i * spacing_.x(), j * spacing_.y(), k * spacing_.z());
  }

  float raw(std::size_t node, Channel ch) const { return params_[node * kChannels + static_cast<int>(ch)]; }
  float& raw(std::size_t node, Channel ch) { return params_[node * kChannels + static_cast<int>(ch)]; }
  float gradient(std::size_t node, Channel ch) const {
    return grads_[node * kChannels + static_cast<int>(ch)];
  }

  std::span<float> parameters() { return params_; }
  std::span<const float> parameters() const { return params_; }
  std::span<float> gradients() { return grads_; }
  std::span<const float> gradients() const { return grads_; }

  // Stencil for x; nullopt when x lies outside the bounds.
  std::optional<TrilinearStencil> stencil(const Vec3& x) const;

  // Trilinear interpolation of the raw channels at x (all five channels).
  std::array<double, kChannels> interpolate_raw(const TrilinearStencil& s) const;

  // Activated field value. Outside the bounds: sigma 0, black, logit -inf.
  FieldSample query(const Vec3& x) const;

  // Adds upstream_grad (w.r.t. the activated channel value at x) times the
  // activation derivative at the interpolated raw value times each node's
  // trilinear weight into the gradient buffer. No-op outside the bounds.
  void scatter_gradient(const Vec3& x, Channel ch, double upstream_grad);
  // Same, with the gradient already expressed w.r.t. the interpolated raw
  // value (skips the activation chain).
  void scatter_raw_gradient(const Vec3& x, Channel ch, double raw_grad);
  void scatter_raw_gradient(const TrilinearStencil& s, Channel ch, double raw_grad);

  void zero_gradients();

 private:
  GridResolution res_;
  Aabb bounds_;
  Vec3 spacing_;
  std::vector<float> params_;
  std::vector<float> grads_;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary checkpoint; layout documented in docs/grid_format.md.
void save_checkpoint(const FieldGrid& grid, const std::filesystem::path& path);
FieldGrid load_checkpoint(const std::filesystem::path& path);

}  // namespace fruitnerf
