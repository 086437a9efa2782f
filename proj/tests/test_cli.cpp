#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

namespace {

const std::string cli = FRUITNERF_CLI;

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The JSON error is the last line; progress logs precede it.
nlohmann::json last_error(const std::filesystem::path& dir) {
  std::ifstream in(dir / "stderr");
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  return nlohmann::json::parse(last);
}

// Runs the CLI with stdout and stderr captured in `dir`.
int invoke(const std::filesystem::path& dir, const std::string& args) {
  return testing::run_command(cli + " " + args + " >" + (dir / "stdout").string() + " 2>" +
                              (dir / "stderr").string());
}

const std::string tiny =
    "--scene.fruit_count=3 --capture.frames=4 --capture.image_size=24 --capture.focal=33 "
    "--train.grid_resolution=16 --train.iterations=3 --train.rays_per_batch=64 --train.samples_per_ray=16 "
    "--export.lateral_resolution=24 --export.steps=24";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("validate") {
    testing::TempDir dir("cli_validate");
    const std::string ref = std::string(FRUITNERF_SOURCE_DIR) + "/configs/reference.json";
    CHECK(invoke(dir.path(), "validate " + ref) == 0);
    CHECK(nlohmann::json::parse(slurp(dir.path() / "stdout"))["diagnostics"].empty());

    CHECK(invoke(dir.path(), "validate " + ref + " --count.dbscan.eps=0 --capture.frames=0") == 2);
    const auto diags = nlohmann::json::parse(slurp(dir.path() / "stdout"))["diagnostics"];
    REQUIRE(diags.size() == 2);
    CHECK(diags[0]["field"] == "count.dbscan.eps");
    CHECK(diags[1]["field"] == "capture.frames");

    std::ofstream(dir.path() / "bad.json") << "{\"train\": {\"iters\": 3}}";
    CHECK(invoke(dir.path(), "validate " + (dir.path() / "bad.json").string()) == 2);
  }

  TEST_CASE("usage errors") {
    testing::TempDir dir("cli_usage");
    CHECK(invoke(dir.path(), "") == 64);
    CHECK(invoke(dir.path(), "frobnicate") == 64);
    CHECK(invoke(dir.path(), "validate") == 64);
    CHECK(invoke(dir.path(), "count --config /nonexistent/config.json") == 64);
    CHECK(invoke(dir.path(), "--help") == 0);
  }

  TEST_CASE("invalid overrides exit with the config code") {
    testing::TempDir dir("cli_config");
    const std::string out = "-o " + (dir.path() / "run").string();
    CHECK(invoke(dir.path(), "synth " + out + " --train.iterations=-5") == 2);
    const auto err = last_error(dir.path());
    CHECK(err["error"] == "config");
    CHECK(err["diagnostics"][0]["field"] == "train.iterations");
    CHECK(invoke(dir.path(), "synth " + out + " --nope=1") == 2);
    CHECK(invoke(dir.path(), "synth " + out + " --scene.fruit_count") == 2);
  }

  TEST_CASE("missing artifacts") {
    testing::TempDir dir("cli_missing");
    CHECK(invoke(dir.path(), "count -o " + (dir.path() / "run").string()) == 3);
    const auto err = last_error(dir.path());
    CHECK(err["error"] == "missing_artifact");
    CHECK(err["run_first"] == "export");
    CHECK(invoke(dir.path(), "train -o " + (dir.path() / "run").string()) == 3);
  }

  TEST_CASE("tiny end to end run") {
    testing::TempDir dir("cli_e2e");
    const auto run = dir.path() / "run";
    CHECK(invoke(dir.path(), "e2e -o " + run.string() + " " + tiny) == 0);
    const auto summary = nlohmann::json::parse(slurp(dir.path() / "stdout"));
    CHECK(summary["subcommand"] == "e2e");
    CHECK(summary.contains("count"));
    CHECK(summary.contains("eval"));
    for (const char* name : {"manifest.json", "count_report.json", "eval_report.json", "fruits.ply", "grid.bin"}) {
      CHECK(std::filesystem::is_regular_file(run / name));
    }
    const auto manifest = nlohmann::json::parse(slurp(run / "manifest.json"));
    CHECK(manifest["subcommand"] == "e2e");

    SUBCASE("stages rerun from existing artifacts") {
      CHECK(invoke(dir.path(), "count -o " + run.string() + " " + tiny) == 0);
      CHECK(nlohmann::json::parse(slurp(dir.path() / "stdout"))["count"]["total"] == summary["count"]["total"]);
    }
    SUBCASE("the environment supplies the output directory") {
      const auto env_run = dir.path() / "env_run";
      CHECK(testing::run_command("FRUITNERF_OUTPUT_DIR=" + env_run.string() + " " + cli + " synth " + tiny +
                                 " >/dev/null 2>&1") == 0);
      CHECK(std::filesystem::is_regular_file(env_run / "gt_fruits.json"));
    }
  }
}
