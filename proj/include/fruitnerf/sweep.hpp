#pragma once

#include "fruitnerf/pipeline.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fruitnerf {

struct SweepCell {
  int frames = 0;
  int resolution = 0;
  int count = 0;
  int ground_truth = 0;
  EvalReport eval;
  std::optional<std::string> error;
};

// Trains an independent field per (frames, resolution) cell on the same
// scene with all other parameters fixed. A failing cell is recorded and the
// sweep continues. Throws std::invalid_argument if frame counts are not
// sorted ascending.
std::vector<SweepCell> frame_sweep(const PipelineConfig& config, std::span<const int> frame_counts,
                                   std::span<const int> resolutions);

// Single cell: synthesize, train, export, count and score in memory.
SweepCell run_cell(const PipelineConfig& config, const Scene& scene, int frames, int resolution);

// frames,resolution,count,gt,precision,recall,f1
void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepCell> cells);

}  // namespace fruitnerf
