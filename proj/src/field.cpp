#include "fruitnerf/field.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace fruitnerf {

double activate(Channel ch, double raw) {
  return ch == Channel::density ? softplus(raw) : sigmoid(raw);
}

double activation_derivative(Channel ch, double raw) {
  // softplus' = sigmoid; sigmoid' = s (1 - s).
  const double s = sigmoid(raw);
  return ch == Channel::density ? s : s * (1.0 - s);
}

FieldGrid::FieldGrid(GridResolution resolution, const Aabb& bounds, Init init)
    : res_(resolution), bounds_(bounds) {
  if (res_.nx < 2 || res_.ny < 2 || res_.nz < 2) {
    throw std::invalid_argument("grid resolution must be >= 2 on every axis");
  }
  if (!bounds_.valid()) throw std::invalid_argument("grid bounds must satisfy min < max");
  if (res_.nodes() > std::size_t{1} << 31) throw std::invalid_argument("grid resolution too large");
  spacing_ = bounds_.extent().cwiseQuotient(Vec3(res_.nx - 1, res_.ny - 1, res_.nz - 1));
  params_.resize(res_.nodes() * kChannels);
  grads_.assign(params_.size(), 0.0f);
  for (std::size_t n = 0; n < res_.nodes(); ++n) {
    float* p = &params_[n * kChannels];
    p[0] = static_cast<float>(init.raw_density);
    p[1] = p[2] = p[3] = static_cast<float>(init.raw_rgb);
    p[4] = static_cast<float>(init.raw_semantic);
  }
}

std::optional<TrilinearStencil> FieldGrid::stencil(const Vec3& x) const {
  if (!bounds_.contains(x)) return std::nullopt;
  const Vec3 u = (x - bounds_.min).cwiseQuotient(spacing_);
  const int n[3] = {res_.nx, res_.ny, res_.nz};
  int i0[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    // Cells are [i, i+1]; the far face belongs to the last cell.
    const int i = std::clamp(static_cast<int>(std::floor(u[a])), 0, n[a] - 2);
    i0[a] = i;
    f[a] = std::clamp(u[a] - i, 0.0, 1.0);
  }
  TrilinearStencil s;
  const std::size_t base = node_index(i0[0], i0[1], i0[2]);
  const std::size_t sx = 1, sy = static_cast<std::size_t>(res_.nx), sz = sy * res_.ny;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    s.node[c] = static_cast<std::uint32_t>(base + dx * sx + dy * sy + dz * sz);
    s.weight[c] = (dx ? f[0] : 1.0 - f[0]) * (dy ? f[1] : 1.0 - f[1]) * (dz ? f[2] : 1.0 - f[2]);
  }
  return s;
}

std::array<double, kChannels> FieldGrid::interpolate_raw(const TrilinearStencil& s) const {
  std::array<double, kChannels> out{};
  for (int c = 0; c < 8; ++c) {
    const float* p = &params_[static_cast<std::size_t>(s.node[c]) * kChannels];
    const double w = s.weight[c];
    for (int ch = 0; ch < kChannels; ++ch) out[ch] += w * p[ch];
  }
  return out;
}

FieldSample FieldGrid::query(const Vec3& x) const {
  FieldSample out;
  out.position = x;
  const auto s = stencil(x);
  if (!s) return out;
  const auto raw = interpolate_raw(*s);
  out.sigma = softplus(raw[0]);
  out.color = Vec3(sigmoid(raw[1]), sigmoid(raw[2]), sigmoid(raw[3]));
  out.semantic_logit = raw[4];
  return out;
}

void FieldGrid::scatter_raw_gradient(const TrilinearStencil& s, Channel ch, double raw_grad) {
  const int c0 = static_cast<int>(ch);
  for (int c = 0; c < 8; ++c) {
    grads_[static_cast<std::size_t>(s.node[c]) * kChannels + c0] += static_cast<float>(raw_grad * s.weight[c]);
  }
}

void FieldGrid::scatter_raw_gradient(const Vec3& x, Channel ch, double raw_grad) {
  if (const auto s = stencil(x)) scatter_raw_gradient(*s, ch, raw_grad);
}

void FieldGrid::scatter_gradient(const Vec3& x, Channel ch, double upstream_grad) {
  const auto s = stencil(x);
  if (!s) return;
  const double raw = interpolate_raw(*s)[static_cast<int>(ch)];
  scatter_raw_gradient(*s, ch, upstream_grad * activation_derivative(ch, raw));
}

void FieldGrid::zero_gradients() { std::fill(grads_.begin(), grads_.end(), 0.0f); }

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'F', 'N', 'G', 'R', 'I', 'D', '0', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw CheckpointError(std::string("truncated checkpoint header (") + what + ")");
  }
  return v;
}

}  // namespace

void save_checkpoint(const FieldGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const auto& r = grid.resolution();
  put<std::int32_t>(out, r.nx);
  put<std::int32_t>(out, r.ny);
  put<std::int32_t>(out, r.nz);
  for (int a = 0; a < 3; ++a) put<double>(out, grid.bounds().min[a]);
  for (int a = 0; a < 3; ++a) put<double>(out, grid.bounds().max[a]);
  put<std::uint32_t>(out, kChannels);
  // Channel-planar, x-fastest.
  std::vector<float> plane(r.nodes());
  const auto params = grid.parameters();
  for (int ch = 0; ch < kChannels; ++ch) {
    for (std::size_t n = 0; n < plane.size(); ++n) plane[n] = params[n * kChannels + ch];
    out.write(reinterpret_cast<const char*>(plane.data()),
              static_cast<std::streamsize>(plane.size() * sizeof(float)));
  }
  if (!out) throw CheckpointError("failed writing " + path.string());
}

FieldGrid load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw CheckpointError(path.string() + " is not a grid checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  GridResolution r;
  r.nx = get<std::int32_t>(in, "nx");
  r.ny = get<std::int32_t>(in, "ny");
  r.nz = get<std::int32_t>(in, "nz");
  Aabb bounds;
  for (int a = 0; a < 3; ++a) bounds.min[a] = get<double>(in, "bounds");
  for (int a = 0; a < 3; ++a) bounds.max[a] = get<double>(in, "bounds");
  const auto channels = get<std::uint32_t>(in, "channels");
  if (channels != kChannels) throw CheckpointError("unexpected channel count " + std::to_string(channels));
  FieldGrid grid(r, bounds);
  std::vector<float> plane(r.nodes());
  auto params = grid.parameters();
  for (int ch = 0; ch < kChannels; ++ch) {
    if (!in.read(reinterpret_cast<char*>(plane.data()),
                 static_cast<std::streamsize>(plane.size() * sizeof(float)))) {
      throw CheckpointError("truncated checkpoint body in channel " + std::to_string(ch));
    }
    for (std::size_t n = 0; n < plane.size(); ++n) params[n * kChannels + ch] = plane[n];
  }
  return grid;
}

}  // namespace fruitnerf
