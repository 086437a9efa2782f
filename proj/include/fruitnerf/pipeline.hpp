#pragma once

#include "fruitnerf/count.hpp"
#include "fruitnerf/eval.hpp"
#include "fruitnerf/export.hpp"
#include "fruitnerf/scenegen.hpp"
#include "fruitnerf/train.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace fruitnerf {

struct CorruptionStep {
  MaskCorruption mode = MaskCorruption::dropout;
  double magnitude = 0.0;
};

// Dataset capture settings for the synth stage.
struct CaptureConfig {
  int frames = 60;
  int image_size = 256;
  double focal = 350.0;
  double camera_radius = 1.6;
  Vec3 look_at{0.5, 0.5, 0.4};
  std::vector<CorruptionStep> corruption;
};

struct EvalConfig {
  // Match radius; the fruit radius when <= 0.
  double match_radius = 0.0;
  Assignment assignment = Assignment::greedy;
};

struct SweepConfig {
  std::vector<int> frames{5, 10, 20, 40, 60, 100};
  std::vector<int> resolutions{256};
};

struct PipelineConfig {
  std::uint64_t seed = 7;
  std::filesystem::path output_dir = "out";
  SceneSpec scene;
  CaptureConfig capture;
  TrainConfig train;
  ExportConfig export_cfg;
  CountConfig count;
  EvalConfig eval;
  SweepConfig sweep;

  // Seeds of each stage derived from the global seed.
  std::uint64_t scene_seed() const;
  std::uint64_t camera_seed() const;
  std::uint64_t corruption_seed() const;
  std::uint64_t train_seed() const;
};

// One diagnostic per invariant violation, named by dotted config path.
struct Diagnostic {
  std::string field;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::vector<Diagnostic> diagnostics = {})
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

nlohmann::json default_config_json();
nlohmann::json to_json(const PipelineConfig& config);

// Parses a config document layered over the defaults. Unknown keys and type
// mismatches are reported as diagnostics rather than thrown.
PipelineConfig parse_config(const nlohmann::json& doc, std::vector<Diagnostic>& diagnostics);
std::vector<Diagnostic> validate(const PipelineConfig& config);

// Applies `--a.b.c=value` style overrides to a config document. The value is
// parsed as JSON when possible and used as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& dotted_key, const std::string& value);

nlohmann::json load_json(const std::filesystem::path& path);

// Stage entry points operating on the output directory layout:
//   dataset/            images, masks, transforms.json
//   gt_fruits.json
//   grid.bin, loss.csv
//   fruits.ply
//   count_report.json
//   eval_report.json
namespace artifacts {
inline constexpr const char* dataset = "dataset";
inline constexpr const char* ground_truth = "gt_fruits.json";
inline constexpr const char* grid = "grid.bin";
inline constexpr const char* loss_curve = "loss.csv";
inline constexpr const char* cloud = "fruits.ply";
inline constexpr const char* count_report = "count_report.json";
inline constexpr const char* eval_report = "eval_report.json";
inline constexpr const char* manifest = "manifest.json";
}  // namespace artifacts

class MissingArtifactError : public std::runtime_error {
 public:
  MissingArtifactError(const std::filesystem::path& artifact, std::string producer)
      : std::runtime_error("missing artifact " + artifact.string() + "; run '" + producer +
                           "' first"),
        artifact_(artifact),
        producer_(std::move(producer)) {}
  const std::filesystem::path& artifact() const { return artifact_; }
  const std::string& producer() const { return producer_; }

 private:
  std::filesystem::path artifact_;
  std::string producer_;
};

Scene build_scene(const PipelineConfig& config);
std::vector<PosedFrame> capture_frames(const Scene& scene, const CaptureConfig& capture,
                                       std::uint64_t camera_seed, std::uint64_t corruption_seed);

void run_synth(const PipelineConfig& config);
void run_train(const PipelineConfig& config);
void run_export(const PipelineConfig& config);
CountReport run_count(const PipelineConfig& config);
EvalReport run_eval(const PipelineConfig& config);

// Writes manifest.json: subcommand, config hash, seed and a SHA-256 per
// artifact present in the output directory.
void write_manifest(const PipelineConfig& config, const std::string& subcommand);
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_string(const std::string& data);

}  // namespace fruitnerf
