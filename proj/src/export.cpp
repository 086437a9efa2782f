#include "fruitnerf/export.hpp"

#include "fruitnerf/parallel.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace fruitnerf {

std::vector<std::string> ExportConfig::diagnostics() const {
  std::vector<std::string> out;
  if (roi && !roi->valid()) out.push_back("roi must satisfy min < max on every axis");
  if (lateral_resolution < 2) out.push_back("lateral_resolution must be >= 2");
  if (steps < 2) out.push_back("steps must be >= 2");
  if (!(density_threshold >= 0.0)) out.push_back("density_threshold must be >= 0");
  if (!(semantic_threshold >= 0.0 && semantic_threshold <= 1.0)) out.push_back("semantic_threshold must be in [0, 1]");
  return out;
}

FruitPointCloud sample_volume(const FieldGrid& grid, const ExportConfig& config) {
  if (auto diag = config.diagnostics(); !diag.empty()) {
    throw std::invalid_argument("invalid export config: " + diag.front());
  }
  const Aabb roi = config.roi.value_or(grid.bounds());
  const int n = config.lateral_resolution;
  const int steps = config.steps;
  const Vec3 ext = roi.extent();

  // One bucket per face row keeps the output in (ray, step) order however
  // the rows are scheduled.
  std::vector<FruitPointCloud> rows(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
    FruitPointCloud& out = rows[row];
    const double y = roi.min.y() + (row + 0.5) / n * ext.y();
    for (int col = 0; col < n; ++col) {
      const double x = roi.min.x() + (col + 0.5) / n * ext.x();
      for (int s = 0; s < steps; ++s) {
        const double z = roi.max.z() - (s + 0.5) / steps * ext.z();
        const Vec3 p(x, y, z);
        const FieldSample fs = grid.query(p);
        if (fs.sigma < config.density_threshold) continue;
        const double sem = fs.semantic_probability();
        if (sem < config.semantic_threshold) continue;
        out.push_back(p, fs.sigma, sem);
      }
    }
  });
  FruitPointCloud cloud;
  for (auto& r : rows) {
    cloud.points.insert(cloud.points.end(), r.points.begin(), r.points.end());
    cloud.sigma.insert(cloud.sigma.end(), r.sigma.begin(), r.sigma.end());
    cloud.semantic.insert(cloud.semantic.end(), r.semantic.begin(), r.semantic.end());
  }
  return cloud;
}

FruitPointCloud crop(const FruitPointCloud& cloud, const Aabb& box) {
  if (!box.valid()) throw std::invalid_argument("crop box must satisfy min < max on every axis");
  FruitPointCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (box.contains(cloud.points[i])) out.push_back(cloud.points[i], cloud.sigma[i], cloud.semantic[i]);
  }
  return out;
}

void write_ply(const FruitPointCloud& cloud, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path.string());
  std::fprintf(f,
               "ply\nformat ascii 1.0\ncomment fruit point cloud\nelement vertex %zu\n"
               "property float x\nproperty float y\nproperty float z\n"
               "property float sigma\nproperty float semantic\nend_header\n",
               cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    std::fprintf(f, "%.9g %.9g %.9g %.9g %.9g\n", static_cast<float>(p.x()), static_cast<float>(p.y()),
                 static_cast<float>(p.z()), static_cast<float>(cloud.sigma[i]),
                 static_cast<float>(cloud.semantic[i]));
  }
  if (std::fclose(f) != 0) throw std::runtime_error("failed writing " + path.string());
}

FruitPointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PlyError("cannot open " + path.string(), 0);
  std::string line;
  int line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") throw PlyError("missing 'ply' magic", 1);
  if (!next_line() || line.rfind("format ", 0) != 0) throw PlyError("missing format line", line_no);
  if (line != "format ascii 1.0") throw PlyError("unsupported format '" + line + "'", line_no);

  long vertex_count = -1;
  std::vector<std::string> props;
  bool in_vertex = false;
  bool header_done = false;
  while (next_line()) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
    if (kw == "end_header") {
      header_done = true;
      break;
    }
    if (kw == "element") {
      std::string name;
      long count = -1;
      if (!(ls >> name >> count) || count < 0) throw PlyError("malformed element line", line_no);
      in_vertex = name == "vertex";
      if (in_vertex) vertex_count = count;
      else if (count > 0) throw PlyError("unsupported element '" + name + "'", line_no);
    } else if (kw == "property") {
      std::string type, name;
      if (!(ls >> type >> name)) throw PlyError("malformed property line", line_no);
      if (type == "list") throw PlyError("list properties are not supported", line_no);
      if (in_vertex) props.push_back(name);
    } else {
      throw PlyError("unexpected header keyword '" + kw + "'", line_no);
    }
  }
  if (!header_done) throw PlyError("header not terminated by end_header", line_no);
  if (vertex_count < 0) throw PlyError("no vertex element declared", line_no);

  int ix = -1, iy = -1, iz = -1, isig = -1, isem = -1;
  for (int i = 0; i < static_cast<int>(props.size()); ++i) {
    if (props[i] == "x") ix = i;
    else if (props[i] == "y") iy = i;
    else if (props[i] == "z") iz = i;
    else if (props[i] == "sigma") isig = i;
    else if (props[i] == "semantic") isem = i;
  }
  if (ix < 0 || iy < 0 || iz < 0) throw PlyError("vertex element lacks x/y/z properties", line_no);

  FruitPointCloud cloud;
  cloud.points.reserve(vertex_count);
  std::vector<double> values(props.size());
  for (long v = 0; v < vertex_count; ++v) {
    if (!next_line()) {
      throw PlyError("truncated body: expected " + std::to_string(vertex_count) + " vertices, got " +
                         std::to_string(v),
                     line_no + 1);
    }
    std::istringstream ls(line);
    for (auto& val : values) {
      float fv;
      if (!(ls >> fv)) throw PlyError("malformed vertex row", line_no);
      val = fv;
    }
    cloud.push_back(Vec3(values[ix], values[iy], values[iz]), isig >= 0 ? values[isig] : 0.0,
                    isem >= 0 ? values[isem] : 0.0);
  }
  return cloud;
}

}  // namespace fruitnerf
