#include "fruitnerf/sweep.hpp"

#include "fruitnerf/parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace fruitnerf {

SweepCell run_cell(const PipelineConfig& config, const Scene& scene, int frames, int resolution) {
  SweepCell cell;
  cell.frames = frames;
  cell.resolution = resolution;
  cell.ground_truth = static_cast<int>(scene.fruit_centers.size());
  try {
    CaptureConfig capture = config.capture;
    capture.frames = frames;
    // Constant field of view across resolutions.
    capture.focal = config.capture.focal * resolution / config.capture.image_size;
    capture.image_size = resolution;
    const auto posed = capture_frames(scene, capture, config.camera_seed(), config.corruption_seed());
    TrainConfig tc = config.train;
    tc.seed = config.train_seed();
    const TrainResult trained = train(posed, tc);
    const FruitPointCloud cloud = sample_volume(trained.grid, config.export_cfg);
    const CountReport report = count_fruits(cloud.points, config.count);
    cell.count = report.total;
    const double tau = config.eval.match_radius > 0.0 ? config.eval.match_radius : scene.spec.fruit_radius;
    cell.eval = match(report.centers, scene.fruit_centers, tau, config.eval.assignment);
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

std::vector<SweepCell> frame_sweep(const PipelineConfig& config, std::span<const int> frame_counts,
                                   std::span<const int> resolutions) {
  if (!std::is_sorted(frame_counts.begin(), frame_counts.end())) {
    throw std::invalid_argument("frame counts must be sorted ascending");
  }
  const Scene scene = build_scene(config);
  std::vector<SweepCell> cells(frame_counts.size() * resolutions.size());
  parallel_for(cells.size(), [&](std::size_t i) {
    const int f = frame_counts[i / resolutions.size()];
    const int r = resolutions[i % resolutions.size()];
    cells[i] = run_cell(config, scene, f, r);
  });
  return cells;
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepCell> cells) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "frames,resolution,count,gt,precision,recall,f1\n";
  char line[256];
  for (const auto& c : cells) {
    std::snprintf(line, sizeof line, "%d,%d,%d,%d,%.6f,%.6f,%.6f\n", c.frames, c.resolution, c.count, c.ground_truth,
                  c.eval.precision, c.eval.recall, c.eval.f1);
    out << line;
  }
}

}  // namespace fruitnerf
