#pragma once

#include "fruitnerf/camera.hpp"
#include "fruitnerf/geometry.hpp"
#include "fruitnerf/image.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace fruitnerf {

class FieldGrid;

// Parameters of a procedural orchard tree. Fruits are constant-density
// spheres, the trunk a vertical cylinder, foliage a noise-modulated density
// blob filling the crown sphere. Lengths are in scene units (the default ROI
// is the unit cube).
struct SceneSpec {
  std::uint64_t seed = 0;
  int fruit_count = 50;
  double fruit_radius = 0.04;
  Vec3 crown_center{0.5, 0.5, 0.55};
  double crown_radius = 0.3;
  // Fraction of fruits placed in touching groups of two or three.
  double cluster_fraction = 0.2;
  // Minimum center distance between fruits of different groups, in radii.
  double separation_factor = 2.2;
  double trunk_radius = 0.025;
  double fruit_density = 400.0;
  double trunk_density = 400.0;
  double foliage_density = 6.0;
  double foliage_frequency = 9.0;
  // Foliage below this noise value is empty, giving gaps between leaves.
  double foliage_cutoff = 0.45;
  Vec3 fruit_color{0.85, 0.12, 0.08};
  Vec3 foliage_color{0.16, 0.5, 0.12};
  Vec3 trunk_color{0.35, 0.22, 0.1};
  Aabb bounds = Aabb::unit_cube();
  // Quadrature step used by the analytic renderer.
  double render_step = 0.004;

  // Returns one message per violated invariant (empty when valid).
  std::vector<std::string> diagnostics() const;
};

struct Scene {
  SceneSpec spec;
  std::vector<Vec3> fruit_centers;
  // Group id per fruit; fruits sharing an id form a touching cluster.
  std::vector<int> fruit_groups;
};

class PackingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxPlacementAttempts = 10000;

// Deterministic for a fixed spec.seed. Throws std::invalid_argument for an
// invalid spec and PackingError when rejection sampling exhausts its
// attempt budget.
Scene generate_scene(const SceneSpec& spec);

// Analytic field value at a point: total density, the part of it owed to
// fruit, and the density-weighted color.
struct ScenePoint {
  double sigma = 0.0;
  double fruit_sigma = 0.0;
  Vec3 color = Vec3::Zero();
};
ScenePoint evaluate_scene(const Scene& scene, const Vec3& x);

struct Intrinsics {
  double focal = 350.0;
  int width = 256;
  int height = 256;
};

// n cameras on the upper hemisphere of `radius` around `look_at`, uniform in
// solid angle, each aimed at `look_at`.
std::vector<Camera> sample_hemisphere_cameras(int n, double radius, const Vec3& look_at,
                                              std::uint64_t seed, const Intrinsics& intrinsics = {});

struct PosedFrame {
  Camera camera;
  RgbImage rgb;
  Mask mask;
};

// Ray marches the analytic scene at pixel centers. Background is black; a
// mask pixel is set when the accumulated fruit weight exceeds 0.5.
PosedFrame render_frame(const Scene& scene, const Camera& camera);
std::vector<PosedFrame> render_frames(const Scene& scene, const std::vector<Camera>& cameras);

enum class MaskCorruption { soft_edges, dropout, dilate_erode };
MaskCorruption parse_mask_corruption(const std::string& name);
std::string to_string(MaskCorruption mode);

struct CorruptionStats {
  size_t blobs = 0;
  size_t removed = 0;
};

// soft_edges: each connected mask blob is independently dilated or eroded by
// a uniform integer radius in [-magnitude, magnitude].
// dropout: each blob is deleted with probability `magnitude`.
// dilate_erode: the whole mask of a frame is dilated or eroded by one radius
// in [-magnitude, magnitude].
std::vector<PosedFrame> corrupt_masks(std::vector<PosedFrame> frames, MaskCorruption mode,
                                      double magnitude, std::uint64_t seed,
                                      CorruptionStats* stats = nullptr);

// Sets raw grid channels so the grid reproduces the analytic scene at its
// nodes (inverse activations of the analytic density, color and fruit
// fraction). Used as a reference field in tests and diagnostics.
void voxelize_scene(const Scene& scene, FieldGrid& grid);

// Dataset layout on disk: images/NNNN.png, masks/NNNN.png, transforms.json.
void write_dataset(const std::filesystem::path& dir, const std::vector<PosedFrame>& frames);
std::vector<PosedFrame> read_dataset(const std::filesystem::path& dir);

void write_ground_truth(const std::filesystem::path& path, const Scene& scene);
struct GroundTruth {
  std::vector<Vec3> centers;
  double radius = 0.0;
};
GroundTruth read_ground_truth(const std::filesystem::path& path);

}  // namespace fruitnerf
