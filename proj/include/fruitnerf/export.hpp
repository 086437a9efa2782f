#pragma once

#include "fruitnerf/field.hpp"
#include "fruitnerf/geometry.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fruitnerf {

struct ExportConfig {
  // Region to sample; the grid bounds when unset.
  std::optional<Aabb> roi;
  int lateral_resolution = 256;
  int steps = 256;
  double density_threshold = 1.0;
  double semantic_threshold = 0.9;

  std::vector<std::string> diagnostics() const;
};

struct FruitPointCloud {
  std::vector<Vec3> points;
  std::vector<double> sigma;
  std::vector<double> semantic;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void push_back(const Vec3& p, double s, double sem) {
    points.push_back(p);
    sigma.push_back(s);
    semantic.push_back(sem);
  }
};

// Orthographic sweep: rays leave the ROI's top (+z) face straight down, one
// per face pixel, and the field is queried at uniform steps along each.
// Points passing both thresholds are kept, ordered by ray then step.
// Throws std::invalid_argument for an invalid config.
FruitPointCloud sample_volume(const FieldGrid& grid, const ExportConfig& config);

// Points inside the box. Throws std::invalid_argument on a degenerate box.
FruitPointCloud crop(const FruitPointCloud& cloud, const Aabb& box);

class PlyError : public std::runtime_error {
 public:
  PlyError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// ASCII PLY with float properties x, y, z, sigma, semantic.
void write_ply(const FruitPointCloud& cloud, const std::filesystem::path& path);
FruitPointCloud read_ply(const std::filesystem::path& path);

}  // namespace fruitnerf
