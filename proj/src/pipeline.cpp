#include "fruitnerf/pipeline.hpp"

#include "fruitnerf/field.hpp"
#include "fruitnerf/rng.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fruitnerf {

using json = nlohmann::json;

std::uint64_t PipelineConfig::scene_seed() const { return derive_seed(seed, 0x5CE4E); }
std::uint64_t PipelineConfig::camera_seed() const { return derive_seed(seed, 0xCA3E7A); }
std::uint64_t PipelineConfig::corruption_seed() const { return derive_seed(seed, 0xC0447); }
std::uint64_t PipelineConfig::train_seed() const { return derive_seed(seed, 0x7A1F); }

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json box_json(const Aabb& b) { return {{"min", vec_json(b.min)}, {"max", vec_json(b.max)}}; }

const char* assignment_name(Assignment a) { return a == Assignment::greedy ? "greedy" : "optimal"; }

// Reads typed fields out of a config section, recording a diagnostic for
// each missing or mistyped value instead of throwing.
class Reader {
 public:
  explicit Reader(std::vector<Diagnostic>& diags) : diags_(diags) {}

  template <typename T>
  void get(const json& section, const std::string& path, const char* key, T& out) {
    if (!section.is_object() || !section.contains(key)) return;
    const json& v = section.at(key);
    const std::string field = path + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return fail(field, "expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) return fail(field, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) {
          out = v.get<T>();
        } else if (v.get<long long>() < 0) {
          return fail(field, "expected a nonnegative integer");
        } else {
          out = static_cast<T>(v.get<long long>());
        }
      } else {
        const long long x = v.get<long long>();
        if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
          return fail(field, "integer out of range");
        }
        out = static_cast<T>(x);
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return fail(field, "expected a number");
      out = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) return fail(field, "expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, Vec3>) {
      if (!vec3(v, field, out)) return;
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!v.is_array()) return fail(field, "expected an array of integers");
      std::vector<int> xs;
      for (const auto& e : v) {
        if (!e.is_number_integer()) return fail(field, "expected an array of integers");
        xs.push_back(e.get<int>());
      }
      out = std::move(xs);
    }
  }

  bool vec3(const json& v, const std::string& field, Vec3& out) {
    if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
      fail(field, "expected an array of 3 numbers");
      return false;
    }
    out = Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
    return true;
  }

  bool box(const json& v, const std::string& field, Aabb& out) {
    if (!v.is_object() || !v.contains("min") || !v.contains("max")) {
      fail(field, "expected an object with min and max");
      return false;
    }
    return vec3(v.at("min"), field + ".min", out.min) && vec3(v.at("max"), field + ".max", out.max);
  }

  void fail(const std::string& field, const std::string& message) { diags_.push_back({field, message}); }

 private:
  std::vector<Diagnostic>& diags_;
};

// Keys present in `doc` but absent from the default schema.
void unknown_keys(const json& doc, const json& schema, const std::string& path, std::vector<Diagnostic>& diags) {
  if (!doc.is_object()) return;
  for (const auto& [key, value] : doc.items()) {
    const std::string field = path.empty() ? key : path + "." + key;
    if (!schema.is_object() || !schema.contains(key)) {
      diags.push_back({field, "unknown key"});
    } else if (schema.at(key).is_object() && value.is_object()) {
      unknown_keys(value, schema.at(key), field, diags);
    } else if (schema.at(key).is_object() && !value.is_object()) {
      diags.push_back({field, "expected an object"});
    }
  }
}

// Splits "name must be > 0" into ("section.name", message).
void prefixed(const std::string& section, const std::vector<std::string>& messages, std::vector<Diagnostic>& out) {
  for (const auto& m : messages) {
    const auto space = m.find(' ');
    out.push_back({section + "." + m.substr(0, space), m});
  }
}

void require_file(const std::filesystem::path& path, const std::string& producer) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError(path, producer);
}

}  // namespace

json to_json(const PipelineConfig& c) {
  json doc;
  doc["seed"] = c.seed;
  doc["output_dir"] = c.output_dir.string();
  const SceneSpec& s = c.scene;
  doc["scene"] = {
      {"fruit_count", s.fruit_count},
      {"fruit_radius", s.fruit_radius},
      {"crown_center", vec_json(s.crown_center)},
      {"crown_radius", s.crown_radius},
      {"cluster_fraction", s.cluster_fraction},
      {"separation_factor", s.separation_factor},
      {"trunk_radius", s.trunk_radius},
      {"fruit_density", s.fruit_density},
      {"trunk_density", s.trunk_density},
      {"foliage_density", s.foliage_density},
      {"foliage_frequency", s.foliage_frequency},
      {"foliage_cutoff", s.foliage_cutoff},
      {"fruit_color", vec_json(s.fruit_color)},
      {"foliage_color", vec_json(s.foliage_color)},
      {"trunk_color", vec_json(s.trunk_color)},
      {"bounds", box_json(s.bounds)},
      {"render_step", s.render_step},
  };
  json corruption = json::array();
  for (const auto& step : c.capture.corruption) {
    corruption.push_back({{"mode", to_string(step.mode)}, {"magnitude", step.magnitude}});
  }
  doc["capture"] = {
      {"frames", c.capture.frames},
      {"image_size", c.capture.image_size},
      {"focal", c.capture.focal},
      {"camera_radius", c.capture.camera_radius},
      {"look_at", vec_json(c.capture.look_at)},
      {"corruption", corruption},
  };
  const TrainConfig& t = c.train;
  doc["train"] = {
      {"iterations", t.iterations},
      {"rays_per_batch", t.rays_per_batch},
      {"learning_rate", t.learning_rate},
      {"density_learning_rate", t.density_learning_rate},
      {"beta1", t.beta1},
      {"beta2", t.beta2},
      {"epsilon", t.epsilon},
      {"samples_per_ray", t.samples_per_ray},
      {"min_transmittance", t.min_transmittance},
      {"grid_resolution", t.grid_resolution},
      {"bounds", box_json(t.bounds)},
  };
  const ExportConfig& e = c.export_cfg;
  doc["export"] = {
      {"roi", e.roi ? box_json(*e.roi) : json(nullptr)},
      {"lateral_resolution", e.lateral_resolution},
      {"steps", e.steps},
      {"density_threshold", e.density_threshold},
      {"semantic_threshold", e.semantic_threshold},
  };
  const CountConfig& k = c.count;
  doc["count"] = {
      {"outlier", {{"radius", k.outlier_radius}, {"min_neighbors", k.outlier_min_neighbors}}},
      {"dbscan", {{"eps", k.dbscan_eps}, {"min_pts", k.dbscan_min_pts}}},
      {"fruit_radius", k.fruit_radius},
      {"template_points", k.template_points},
      {"volume_band", {{"lo", k.volume_lo}, {"hi", k.volume_hi}}},
      {"max_fruits_per_cluster", k.max_fruits_per_cluster},
      {"hull", to_string(k.hull_mode)},
      {"refine_max_points", k.refine_max_points},
  };
  doc["eval"] = {{"match_radius", c.eval.match_radius}, {"assignment", assignment_name(c.eval.assignment)}};
  doc["sweep"] = {{"frames", c.sweep.frames}, {"resolutions", c.sweep.resolutions}};
  return doc;
}

json default_config_json() { return to_json(PipelineConfig{}); }

PipelineConfig parse_config(const json& doc, std::vector<Diagnostic>& diags) {
  PipelineConfig c;
  if (!doc.is_object()) {
    diags.push_back({"", "config must be a JSON object"});
    return c;
  }
  unknown_keys(doc, default_config_json(), "", diags);
  Reader r(diags);
  const json empty = json::object();
  auto section = [&](const char* name) -> const json& {
    return doc.contains(name) && doc.at(name).is_object() ? doc.at(name) : empty;
  };

  if (doc.contains("seed")) {
    r.get(doc, "", "seed", c.seed);
  }
  if (doc.contains("output_dir")) {
    const json& v = doc.at("output_dir");
    if (v.is_string()) {
      c.output_dir = v.get<std::string>();
    } else {
      r.fail("output_dir", "expected a string");
    }
  }
  // The Reader prefixes fields with "<path>."; top-level keys above are
  // handled separately so their names carry no leading dot.
  for (auto& d : diags) {
    if (d.field.rfind('.', 0) == 0) d.field.erase(0, 1);
  }

  const json& s = section("scene");
  SceneSpec& sp = c.scene;
  r.get(s, "scene", "fruit_count", sp.fruit_count);
  r.get(s, "scene", "fruit_radius", sp.fruit_radius);
  r.get(s, "scene", "crown_center", sp.crown_center);
  r.get(s, "scene", "crown_radius", sp.crown_radius);
  r.get(s, "scene", "cluster_fraction", sp.cluster_fraction);
  r.get(s, "scene", "separation_factor", sp.separation_factor);
  r.get(s, "scene", "trunk_radius", sp.trunk_radius);
  r.get(s, "scene", "fruit_density", sp.fruit_density);
  r.get(s, "scene", "trunk_density", sp.trunk_density);
  r.get(s, "scene", "foliage_density", sp.foliage_density);
  r.get(s, "scene", "foliage_frequency", sp.foliage_frequency);
  r.get(s, "scene", "foliage_cutoff", sp.foliage_cutoff);
  r.get(s, "scene", "fruit_color", sp.fruit_color);
  r.get(s, "scene", "foliage_color", sp.foliage_color);
  r.get(s, "scene", "trunk_color", sp.trunk_color);
  if (s.contains("bounds")) r.box(s.at("bounds"), "scene.bounds", sp.bounds);
  r.get(s, "scene", "render_step", sp.render_step);

  const json& cap = section("capture");
  r.get(cap, "capture", "frames", c.capture.frames);
  r.get(cap, "capture", "image_size", c.capture.image_size);
  r.get(cap, "capture", "focal", c.capture.focal);
  r.get(cap, "capture", "camera_radius", c.capture.camera_radius);
  r.get(cap, "capture", "look_at", c.capture.look_at);
  if (cap.contains("corruption")) {
    const json& list = cap.at("corruption");
    if (!list.is_array()) {
      r.fail("capture.corruption", "expected an array");
    } else {
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string field = "capture.corruption[" + std::to_string(i) + "]";
        const json& item = list[i];
        CorruptionStep step;
        std::string mode;
        if (!item.is_object() || !item.contains("mode") || !item.contains("magnitude")) {
          r.fail(field, "expected an object with mode and magnitude");
          continue;
        }
        r.get(item, field, "mode", mode);
        r.get(item, field, "magnitude", step.magnitude);
        try {
          step.mode = parse_mask_corruption(mode);
        } catch (const std::exception&) {
          r.fail(field + ".mode", "unknown corruption mode '" + mode + "'");
          continue;
        }
        c.capture.corruption.push_back(step);
      }
    }
  }

  const json& t = section("train");
  TrainConfig& tc = c.train;
  r.get(t, "train", "iterations", tc.iterations);
  r.get(t, "train", "rays_per_batch", tc.rays_per_batch);
  r.get(t, "train", "learning_rate", tc.learning_rate);
  r.get(t, "train", "density_learning_rate", tc.density_learning_rate);
  r.get(t, "train", "beta1", tc.beta1);
  r.get(t, "train", "beta2", tc.beta2);
  r.get(t, "train", "epsilon", tc.epsilon);
  r.get(t, "train", "samples_per_ray", tc.samples_per_ray);
  r.get(t, "train", "min_transmittance", tc.min_transmittance);
  r.get(t, "train", "grid_resolution", tc.grid_resolution);
  if (t.contains("bounds")) r.box(t.at("bounds"), "train.bounds", tc.bounds);

  const json& e = section("export");
  ExportConfig& ec = c.export_cfg;
  if (e.contains("roi") && !e.at("roi").is_null()) {
    Aabb box;
    if (r.box(e.at("roi"), "export.roi", box)) ec.roi = box;
  }
  r.get(e, "export", "lateral_resolution", ec.lateral_resolution);
  r.get(e, "export", "steps", ec.steps);
  r.get(e, "export", "density_threshold", ec.density_threshold);
  r.get(e, "export", "semantic_threshold", ec.semantic_threshold);

  const json& k = section("count");
  CountConfig& kc = c.count;
  const json outlier = k.contains("outlier") ? k.at("outlier") : empty;
  const json db = k.contains("dbscan") ? k.at("dbscan") : empty;
  const json band = k.contains("volume_band") ? k.at("volume_band") : empty;
  r.get(outlier, "count.outlier", "radius", kc.outlier_radius);
  r.get(outlier, "count.outlier", "min_neighbors", kc.outlier_min_neighbors);
  r.get(db, "count.dbscan", "eps", kc.dbscan_eps);
  r.get(db, "count.dbscan", "min_pts", kc.dbscan_min_pts);
  r.get(k, "count", "fruit_radius", kc.fruit_radius);
  r.get(k, "count", "template_points", kc.template_points);
  r.get(band, "count.volume_band", "lo", kc.volume_lo);
  r.get(band, "count.volume_band", "hi", kc.volume_hi);
  r.get(k, "count", "max_fruits_per_cluster", kc.max_fruits_per_cluster);
  if (k.contains("hull")) {
    std::string mode;
    r.get(k, "count", "hull", mode);
    try {
      kc.hull_mode = parse_hull_mode(mode);
    } catch (const std::invalid_argument&) {
      if (k.at("hull").is_string()) r.fail("count.hull", "expected 'points' or 'convex_hull'");
    }
  }
  r.get(k, "count", "refine_max_points", kc.refine_max_points);

  const json& ev = section("eval");
  r.get(ev, "eval", "match_radius", c.eval.match_radius);
  if (ev.contains("assignment")) {
    std::string name;
    r.get(ev, "eval", "assignment", name);
    if (name == "greedy") {
      c.eval.assignment = Assignment::greedy;
    } else if (name == "optimal") {
      c.eval.assignment = Assignment::optimal;
    } else if (ev.at("assignment").is_string()) {
      r.fail("eval.assignment", "expected 'greedy' or 'optimal'");
    }
  }

  const json& sw = section("sweep");
  r.get(sw, "sweep", "frames", c.sweep.frames);
  r.get(sw, "sweep", "resolutions", c.sweep.resolutions);
  return c;
}

std::vector<Diagnostic> validate(const PipelineConfig& c) {
  std::vector<Diagnostic> out;
  prefixed("scene", c.scene.diagnostics(), out);
  prefixed("train", c.train.diagnostics(), out);
  prefixed("export", c.export_cfg.diagnostics(), out);
  prefixed("count", c.count.diagnostics(), out);

  if (c.output_dir.empty()) {
    out.push_back({"output_dir", "output_dir must not be empty"});
  } else if (std::filesystem::exists(c.output_dir) && !std::filesystem::is_directory(c.output_dir)) {
    out.push_back({"output_dir", "output_dir exists and is not a directory"});
  }

  const CaptureConfig& cap = c.capture;
  if (cap.frames < 1) out.push_back({"capture.frames", "frames must be >= 1"});
  if (cap.image_size < 8) out.push_back({"capture.image_size", "image_size must be >= 8"});
  if (!(cap.focal > 0.0)) out.push_back({"capture.focal", "focal must be > 0"});
  if (!(cap.camera_radius > 0.0)) out.push_back({"capture.camera_radius", "camera_radius must be > 0"});
  if (!cap.look_at.allFinite()) out.push_back({"capture.look_at", "look_at must be finite"});
  for (std::size_t i = 0; i < cap.corruption.size(); ++i) {
    const auto& step = cap.corruption[i];
    const std::string field = "capture.corruption[" + std::to_string(i) + "].magnitude";
    if (!(step.magnitude >= 0.0)) out.push_back({field, "magnitude must be >= 0"});
    if (step.mode == MaskCorruption::dropout && step.magnitude > 1.0) {
      out.push_back({field, "dropout magnitude must be <= 1"});
    }
  }

  if (!std::isfinite(c.eval.match_radius)) out.push_back({"eval.match_radius", "match_radius must be finite"});

  if (c.sweep.frames.empty()) out.push_back({"sweep.frames", "frames must not be empty"});
  if (!std::is_sorted(c.sweep.frames.begin(), c.sweep.frames.end())) {
    out.push_back({"sweep.frames", "frames must be sorted ascending"});
  }
  if (std::any_of(c.sweep.frames.begin(), c.sweep.frames.end(), [](int f) { return f < 1; })) {
    out.push_back({"sweep.frames", "frames must be >= 1"});
  }
  if (c.sweep.resolutions.empty()) out.push_back({"sweep.resolutions", "resolutions must not be empty"});
  if (std::any_of(c.sweep.resolutions.begin(), c.sweep.resolutions.end(), [](int r) { return r < 8; })) {
    out.push_back({"sweep.resolutions", "resolutions must be >= 8"});
  }
  return out;
}

void apply_override(json& doc, const std::string& dotted_key, const std::string& value) {
  if (dotted_key.empty()) throw ConfigError("empty override key");
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("malformed override key '" + dotted_key + "'");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override '" + dotted_key + "' descends into a non-object");
      *node = json::object();
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json parsed = json::parse(value, nullptr, false);
  *node = parsed.is_discarded() ? json(value) : std::move(parsed);
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  return doc;
}

// ---------------------------------------------------------------------------
// Stages

Scene build_scene(const PipelineConfig& config) {
  SceneSpec spec = config.scene;
  spec.seed = config.scene_seed();
  return generate_scene(spec);
}

std::vector<PosedFrame> capture_frames(const Scene& scene, const CaptureConfig& capture, std::uint64_t camera_seed,
                                       std::uint64_t corruption_seed) {
  Intrinsics intr{capture.focal, capture.image_size, capture.image_size};
  const auto cameras = sample_hemisphere_cameras(capture.frames, capture.camera_radius, capture.look_at, camera_seed, intr);
  auto frames = render_frames(scene, cameras);
  for (std::size_t i = 0; i < capture.corruption.size(); ++i) {
    const auto& step = capture.corruption[i];
    frames = corrupt_masks(std::move(frames), step.mode, step.magnitude, derive_seed(corruption_seed, i));
  }
  return frames;
}

void run_synth(const PipelineConfig& config) {
  const Scene scene = build_scene(config);
  const auto frames = capture_frames(scene, config.capture, config.camera_seed(), config.corruption_seed());
  std::filesystem::create_directories(config.output_dir);
  write_dataset(config.output_dir / artifacts::dataset, frames);
  write_ground_truth(config.output_dir / artifacts::ground_truth, scene);
}

void run_train(const PipelineConfig& config) {
  const auto dataset = config.output_dir / artifacts::dataset;
  require_file(dataset / "transforms.json", "synth");
  const auto frames = read_dataset(dataset);
  TrainConfig tc = config.train;
  tc.seed = config.train_seed();
  const TrainResult result = train(frames, tc);
  save_checkpoint(result.grid, config.output_dir / artifacts::grid);
  write_loss_csv(config.output_dir / artifacts::loss_curve, result.losses);
}

void run_export(const PipelineConfig& config) {
  const auto grid_path = config.output_dir / artifacts::grid;
  require_file(grid_path, "train");
  const FieldGrid grid = load_checkpoint(grid_path);
  write_ply(sample_volume(grid, config.export_cfg), config.output_dir / artifacts::cloud);
}

CountReport run_count(const PipelineConfig& config) {
  const auto cloud_path = config.output_dir / artifacts::cloud;
  require_file(cloud_path, "export");
  const FruitPointCloud cloud = read_ply(cloud_path);
  CountReport report = count_fruits(cloud.points, config.count);
  write_count_report(config.output_dir / artifacts::count_report, report, config.count);
  return report;
}

EvalReport run_eval(const PipelineConfig& config) {
  const auto report_path = config.output_dir / artifacts::count_report;
  const auto gt_path = config.output_dir / artifacts::ground_truth;
  require_file(report_path, "count");
  require_file(gt_path, "synth");
  const auto pred = read_count_centers(report_path);
  const GroundTruth gt = read_ground_truth(gt_path);
  const double tau = config.eval.match_radius > 0.0 ? config.eval.match_radius : gt.radius;
  EvalReport report = match(pred, gt.centers, tau, config.eval.assignment);
  write_eval_report(config.output_dir / artifacts::eval_report, report, tau);
  return report;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

std::string hex(const unsigned char* data, unsigned len) {
  std::ostringstream out;
  for (unsigned i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(data[i]);
  return out.str();
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_, data, n) != 1) throw std::runtime_error("sha256 update failed");
  }
  std::string finish() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_DigestFinal_ex(ctx_, md, &len) != 1) throw std::runtime_error("sha256 final failed");
    return hex(md, len);
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_string(const std::string& data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.finish();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.finish();
}

void write_manifest(const PipelineConfig& config, const std::string& subcommand) {
  const json cfg = to_json(config);
  json doc;
  doc["subcommand"] = subcommand;
  doc["seed"] = config.seed;
  doc["config_sha256"] = sha256_string(cfg.dump());
  doc["config"] = cfg;
  json files = json::object();
  const auto& dir = config.output_dir;
  std::vector<std::filesystem::path> paths;
  const auto dataset = dir / artifacts::dataset;
  if (std::filesystem::is_directory(dataset)) {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dataset)) {
      if (entry.is_regular_file()) paths.push_back(entry.path());
    }
  }
  for (const char* name : {artifacts::ground_truth, artifacts::grid, artifacts::loss_curve, artifacts::cloud,
                           artifacts::count_report, artifacts::eval_report}) {
    if (std::filesystem::is_regular_file(dir / name)) paths.push_back(dir / name);
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) files[std::filesystem::relative(p, dir).generic_string()] = sha256_file(p);
  doc["artifacts"] = files;
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / artifacts::manifest);
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << doc.dump(2) << "\n";
}

}  // namespace fruitnerf
