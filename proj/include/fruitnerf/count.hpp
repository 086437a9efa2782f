#pragma once

#include "fruitnerf/export.hpp"
#include "fruitnerf/geometry.hpp"

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace fruitnerf {

enum class HullMode { points, convex_hull };
const char* to_string(HullMode mode);
HullMode parse_hull_mode(const std::string& name);

struct CountConfig {
  double outlier_radius = 0.012;
  int outlier_min_neighbors = 4;
  double dbscan_eps = 0.012;
  int dbscan_min_pts = 6;
  double fruit_radius = 0.04;
  int template_points = 256;
  // Single-fruit band of cluster volume relative to the template volume.
  double volume_lo = 0.3;
  double volume_hi = 1.8;
  int max_fruits_per_cluster = 6;
  // Cluster hull scored against the placed templates: all points or the
  // convex hull vertices.
  HullMode hull_mode = HullMode::convex_hull;
  // Multi clusters above this size are subsampled before agglomeration.
  int refine_max_points = 3000;

  double template_volume() const;
  std::vector<std::string> diagnostics() const;
};

enum class ClusterLabel { single, multi, tiny };
const char* to_string(ClusterLabel label);

struct Cluster {
  std::vector<std::size_t> members;
  Vec3 centroid = Vec3::Zero();
  double volume = 0.0;
  ClusterLabel label = ClusterLabel::tiny;
};

// Uniform-grid neighbor index over a fixed point set.
class PointIndex {
 public:
  PointIndex(std::span<const Vec3> points, double cell_size);
  // Indices of points within `radius` (inclusive) of p, in ascending order.
  // radius must not exceed the cell size.
  void radius_search(const Vec3& p, double radius, std::vector<std::size_t>& out) const;

 private:
  struct Key {
    long x, y, z;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };
  Key key(const Vec3& p) const;

  std::span<const Vec3> points_;
  double cell_;
  std::unordered_map<Key, std::vector<std::size_t>, KeyHash> cells_;
};

// Keeps point i iff at least min_neighbors other points lie within radius.
std::vector<Vec3> remove_outliers(std::span<const Vec3> points, double radius, int min_neighbors);

struct DbscanResult {
  // Per point: cluster id, or -1 for noise.
  std::vector<int> labels;
  std::vector<Cluster> clusters;
  std::vector<std::size_t> noise;
};

// Core points have at least min_pts points (themselves included) within eps.
// Cores within eps of each other share a cluster; a border point joins the
// cluster of its nearest core (ties to the lower point index). Clusters are
// numbered by their lowest member index, so labels do not depend on the
// traversal order.
DbscanResult dbscan(std::span<const Vec3> points, double eps, int min_pts);

double cluster_volume(std::span<const Vec3> points);

// Labels each cluster by volume / template volume against the band.
ClusterLabel classify_volume(double volume, const CountConfig& config);
void triage(std::vector<Cluster>& clusters, const CountConfig& config);

struct TinyMergeResult {
  std::vector<Cluster> promoted;
  std::vector<Cluster> discarded;
};
// Single-linkage grouping of tiny clusters whose centroids are closer than
// the fruit radius; each group is re-scored on the union of its points and
// becomes a single when its volume falls in the band.
TinyMergeResult merge_tiny(std::span<const Cluster> tiny, std::span<const Vec3> points,
                           const CountConfig& config);

class EmptySetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Symmetric Hausdorff distance under the Euclidean metric.
double hausdorff(std::span<const Vec3> x, std::span<const Vec3> y);
// sup_{a in from} inf_{b in to} |a - b|.
double directed_hausdorff(std::span<const Vec3> from, std::span<const Vec3> to);

struct FruitTemplate {
  double radius = 0.0;
  std::vector<Vec3> points;  // centered at the origin

  // Spherical Fibonacci lattice with `count` points.
  static FruitTemplate sphere(double radius, int count);
};

// Ward (variance-minimizing) agglomerative hierarchy over a point set.
class WardHierarchy {
 public:
  explicit WardHierarchy(std::span<const Vec3> points);
  // Partition into k clusters (1 <= k <= n): label per point in [0, k),
  // numbered by lowest member index.
  std::vector<int> labels(int k) const;
  std::size_t size() const { return n_; }

 private:
  struct Merge {
    std::size_t a, b;
    double height;
  };
  std::size_t n_;
  std::vector<Merge> merges_;  // in ascending height
};

struct RefineResult {
  int k = 1;
  std::vector<Vec3> centers;
  // Hausdorff distance for each hypothesis k = 1..N.
  std::vector<double> distances;
};

// Splits a multi-fruit cluster into k = 1..max_k sub-clusters, places the
// template at each sub-cluster centroid and keeps the k whose template union
// X scores best against the cluster (smallest k on ties). The score is
//   max(sup_{x in X} d(x, cluster), sup_{y in hull} d(y, X)),
// which is the Hausdorff distance to the cluster when `hull` is empty.
RefineResult refine_multi(std::span<const Vec3> cluster_points, const FruitTemplate& fruit,
                          int max_k, std::span<const Vec3> hull = {});

struct ClusterSummary {
  ClusterLabel label = ClusterLabel::single;
  Vec3 centroid = Vec3::Zero();
  double volume = 0.0;
  std::size_t points = 0;
  int fruits = 0;
  // Refinement score per hypothesis k = 1..N (multi clusters only).
  std::vector<double> scores;
};

struct CountReport {
  int total = 0;
  int singles = 0;
  int multi_clusters = 0;
  int multi_fruits = 0;
  int tiny_promoted = 0;
  int tiny_discarded = 0;
  std::size_t input_points = 0;
  std::size_t filtered_points = 0;
  std::size_t noise_points = 0;
  std::vector<Vec3> centers;
  std::vector<ClusterSummary> clusters;
};

// Outlier removal, DBSCAN triage, tiny-cluster merging and multi-cluster
// refinement. Input order does not affect the result.
CountReport count_fruits(std::span<const Vec3> points, const CountConfig& config);

void write_count_report(const std::filesystem::path& path, const CountReport& report,
                        const CountConfig& config);
std::vector<Vec3> read_count_centers(const std::filesystem::path& path);

}  // namespace fruitnerf
