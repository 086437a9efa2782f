// fruitnerf: command-line driver for the counting pipeline.
//
//   fruitnerf <synth|train|export|count|eval|e2e|sweep|validate>
//             [--config FILE] [--output-dir DIR] [--section.key=value ...]
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid config,
// 3 missing upstream artifact, 64 usage error.

#include "fruitnerf/pipeline.hpp"
#include "fruitnerf/sweep.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <iostream>

namespace {

using json = nlohmann::json;
namespace fn = fruitnerf;

enum Exit { kOk = 0, kFailure = 1, kInvalidConfig = 2, kMissingArtifact = 3, kUsage = 64 };

json diagnostics_json(const std::vector<fn::Diagnostic>& diags) {
  json out = json::array();
  for (const auto& d : diags) out.push_back({{"field", d.field}, {"message", d.message}});
  return out;
}

void report_error(const std::string& kind, const std::string& message, json extra = json::object()) {
  json err = {{"error", kind}, {"message", message}};
  err.update(extra);
  std::cerr << err.dump() << std::endl;
}

struct Options {
  std::string config_path;
  std::string output_dir;
  std::vector<std::string> extras;
};

// Turns leftover `--a.b=value` / `--a.b value` arguments into overrides.
void apply_overrides(json& doc, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() <= 2) throw fn::ConfigError("unexpected argument '" + arg + "'");
    const std::string body = arg.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      fn::apply_override(doc, body.substr(0, eq), body.substr(eq + 1));
    } else if (i + 1 < extras.size()) {
      fn::apply_override(doc, body, extras[++i]);
    } else {
      throw fn::ConfigError("override '" + arg + "' has no value");
    }
  }
}

fn::PipelineConfig resolve_config(const Options& opts, bool check) {
  json doc = opts.config_path.empty() ? json::object() : fn::load_json(opts.config_path);
  apply_overrides(doc, opts.extras);
  if (const char* env = std::getenv("FRUITNERF_OUTPUT_DIR"); env && *env) doc["output_dir"] = env;
  if (!opts.output_dir.empty()) doc["output_dir"] = opts.output_dir;
  std::vector<fn::Diagnostic> diags;
  fn::PipelineConfig config = fn::parse_config(doc, diags);
  if (check) {
    auto more = fn::validate(config);
    diags.insert(diags.end(), more.begin(), more.end());
  }
  if (!diags.empty()) throw fn::ConfigError("invalid config", std::move(diags));
  return config;
}

void log(const std::string& msg) { std::cerr << "[fruitnerf] " << msg << std::endl; }

json count_summary(const fn::CountReport& r) {
  return {{"total", r.total},
          {"singles", r.singles},
          {"multi_clusters", r.multi_clusters},
          {"multi_fruits", r.multi_fruits},
          {"tiny_promoted", r.tiny_promoted},
          {"points", r.filtered_points}};
}

json eval_summary(const fn::EvalReport& r) {
  return {{"tp", r.true_positives},
          {"fp", r.false_positives},
          {"fn", r.false_negatives},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1}};
}

int run_stage(const std::string& name, const Options& opts) {
  const fn::PipelineConfig config = resolve_config(opts, true);
  json summary = {{"subcommand", name}, {"output_dir", config.output_dir.string()}};
  auto stage = [&](const std::string& s) {
    log(s + " -> " + config.output_dir.string());
    if (s == "synth") {
      fn::run_synth(config);
    } else if (s == "train") {
      fn::run_train(config);
    } else if (s == "export") {
      fn::run_export(config);
    } else if (s == "count") {
      summary["count"] = count_summary(fn::run_count(config));
    } else if (s == "eval") {
      summary["eval"] = eval_summary(fn::run_eval(config));
    }
  };
  if (name == "e2e") {
    for (const char* s : {"synth", "train", "export", "count", "eval"}) stage(s);
  } else if (name == "sweep") {
    const auto cells = fn::frame_sweep(config, config.sweep.frames, config.sweep.resolutions);
    std::filesystem::create_directories(config.output_dir);
    fn::write_sweep_csv(config.output_dir / "sweep.csv", cells);
    json rows = json::array();
    for (const auto& c : cells) {
      json row = {{"frames", c.frames}, {"resolution", c.resolution}, {"count", c.count}, {"gt", c.ground_truth}};
      if (c.error) row["error"] = *c.error;
      rows.push_back(row);
    }
    summary["cells"] = rows;
  } else {
    stage(name);
  }
  fn::write_manifest(config, name);
  std::cout << summary.dump() << std::endl;
  return kOk;
}

int run_validate(const Options& opts) {
  json doc = fn::load_json(opts.config_path);
  apply_overrides(doc, opts.extras);
  std::vector<fn::Diagnostic> diags;
  const fn::PipelineConfig config = fn::parse_config(doc, diags);
  auto more = fn::validate(config);
  diags.insert(diags.end(), more.begin(), more.end());
  std::cout << json{{"diagnostics", diagnostics_json(diags)}}.dump(2) << std::endl;
  return diags.empty() ? kOk : kInvalidConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic radiance field fruit counting pipeline"};
  app.require_subcommand(1);
  Options opts;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "Generate the synthetic scene and render the posed dataset"},
      {"train", "Fit the voxel field to the dataset"},
      {"export", "Sample the trained field into a fruit point cloud"},
      {"count", "Cluster the point cloud and count fruits"},
      {"eval", "Score counted fruit centers against ground truth"},
      {"e2e", "Run all stages in order"},
      {"sweep", "Count fruits over a grid of frame counts and resolutions"},
      {"validate", "Check a config file and list every violation"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->allow_extras();
    if (name == "validate") {
      sub->add_option("config", opts.config_path, "Config file")->required()->check(CLI::ExistingFile);
    } else {
      sub->add_option("-c,--config", opts.config_path, "Config file (defaults when omitted)")->check(CLI::ExistingFile);
      sub->add_option("-o,--output-dir", opts.output_dir, "Output directory (overrides FRUITNERF_OUTPUT_DIR)");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  opts.extras = sub->remaining();
  const std::string name = sub->get_name();
  try {
    return name == "validate" ? run_validate(opts) : run_stage(name, opts);
  } catch (const fn::ConfigError& e) {
    report_error("config", e.what(), {{"diagnostics", diagnostics_json(e.diagnostics())}});
    return kInvalidConfig;
  } catch (const fn::MissingArtifactError& e) {
    report_error("missing_artifact", e.what(), {{"artifact", e.artifact().string()}, {"run_first", e.producer()}});
    return kMissingArtifact;
  } catch (const std::exception& e) {
    report_error("failure", e.what(), {{"subcommand", name}});
    return kFailure;
  }
}
