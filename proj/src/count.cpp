#include "fruitnerf/count.hpp"

#include "fruitnerf/hull.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

namespace fruitnerf {
namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;  // root is the smallest index
  }

 private:
  std::vector<std::size_t> parent_;
};

Vec3 centroid_of(std::span<const Vec3> pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return pts.empty() ? c : Vec3(c / static_cast<double>(pts.size()));
}

std::vector<Vec3> gather(std::span<const Vec3> points, std::span<const std::size_t> idx) {
  std::vector<Vec3> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(points[i]);
  return out;
}

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

}  // namespace

double CountConfig::template_volume() const {
  return 4.0 / 3.0 * std::numbers::pi * fruit_radius * fruit_radius * fruit_radius;
}

std::vector<std::string> CountConfig::diagnostics() const {
  std::vector<std::string> out;
  if (!(outlier_radius > 0.0)) out.push_back("outlier.radius must be > 0");
  if (outlier_min_neighbors < 1) out.push_back("outlier.min_neighbors must be >= 1");
  if (!(dbscan_eps > 0.0)) out.push_back("dbscan.eps must be > 0");
  if (dbscan_min_pts < 1) out.push_back("dbscan.min_pts must be >= 1");
  if (!(fruit_radius > 0.0)) out.push_back("fruit_radius must be > 0");
  if (template_points < 4) out.push_back("template_points must be >= 4");
  if (!(volume_lo > 0.0 && volume_lo < 1.0)) out.push_back("volume_band.lo must be in (0, 1)");
  if (!(volume_hi > 1.0)) out.push_back("volume_band.hi must be > 1");
  if (max_fruits_per_cluster < 2) out.push_back("max_fruits_per_cluster must be >= 2");
  if (refine_max_points < 16) out.push_back("refine_max_points must be >= 16");
  return out;
}

const char* to_string(HullMode mode) {
  switch (mode) {
    case HullMode::points: return "points";
    case HullMode::convex_hull: return "convex_hull";
  }
  return "unknown";
}

HullMode parse_hull_mode(const std::string& name) {
  for (HullMode m : {HullMode::points, HullMode::convex_hull}) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown hull mode '" + name + "'");
}

const char* to_string(ClusterLabel label) {
  switch (label) {
    case ClusterLabel::single: return "single";
    case ClusterLabel::multi: return "multi";
    case ClusterLabel::tiny: return "tiny";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Neighbor index

std::size_t PointIndex::KeyHash::operator()(const Key& k) const {
  std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
  h ^= static_cast<std::size_t>(k.y) * 19349663u;
  h ^= static_cast<std::size_t>(k.z) * 83492791u;
  return h;
}

PointIndex::Key PointIndex::key(const Vec3& p) const {
  return {static_cast<long>(std::floor(p.x() / cell_)), static_cast<long>(std::floor(p.y() / cell_)),
          static_cast<long>(std::floor(p.z() / cell_))};
}

PointIndex::PointIndex(std::span<const Vec3> points, double cell_size) : points_(points), cell_(cell_size) {
  if (!(cell_size > 0.0)) throw std::invalid_argument("cell size must be > 0");
  cells_.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) cells_[key(points[i])].push_back(i);
}

void PointIndex::radius_search(const Vec3& p, double radius, std::vector<std::size_t>& out) const {
  out.clear();
  const double r2 = radius * radius;
  const Key c = key(p);
  for (long dz = -1; dz <= 1; ++dz) {
    for (long dy = -1; dy <= 1; ++dy) {
      for (long dx = -1; dx <= 1; ++dx) {
        const auto it = cells_.find({c.x + dx, c.y + dy, c.z + dz});
        if (it == cells_.end()) continue;
        for (auto j : it->second) {
          if ((points_[j] - p).squaredNorm() <= r2) out.push_back(j);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
}

std::vector<Vec3> remove_outliers(std::span<const Vec3> points, double radius, int min_neighbors) {
  if (!(radius > 0.0)) throw std::invalid_argument("outlier radius must be > 0");
  if (min_neighbors < 1) throw std::invalid_argument("min_neighbors must be >= 1");
  std::vector<Vec3> out;
  if (points.empty()) return out;
  const PointIndex index(points, radius);
  std::vector<std::size_t> nb;
  for (std::size_t i = 0; i < points.size(); ++i) {
    index.radius_search(points[i], radius, nb);
    if (static_cast<int>(nb.size()) - 1 >= min_neighbors) out.push_back(points[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// DBSCAN

DbscanResult dbscan(std::span<const Vec3> points, double eps, int min_pts) {
  if (!(eps > 0.0)) throw std::invalid_argument("dbscan eps must be > 0");
  if (min_pts < 1) throw std::invalid_argument("dbscan min_pts must be >= 1");
  DbscanResult res;
  const std::size_t n = points.size();
  res.labels.assign(n, -1);
  if (n == 0) return res;

  const PointIndex index(points, eps);
  std::vector<std::size_t> nb;
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    index.radius_search(points[i], eps, nb);
    core[i] = static_cast<int>(nb.size()) >= min_pts;
  }
  DisjointSet sets(n);
  std::vector<long> owner(n, -1);  // core each border point attaches to
  for (std::size_t i = 0; i < n; ++i) {
    index.radius_search(points[i], eps, nb);
    if (core[i]) {
      for (auto j : nb) {
        if (j > i && core[j]) sets.unite(i, j);
      }
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    for (auto j : nb) {
      if (!core[j]) continue;
      const double d = (points[j] - points[i]).squaredNorm();
      if (d < best) {  // ascending j: ties keep the lower index
        best = d;
        owner[i] = static_cast<long>(j);
      }
    }
  }

  // Component root per point (cores and attached borders); the root is the
  // lowest core index, so cluster numbering follows the lowest member.
  std::vector<long> root(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) root[i] = static_cast<long>(sets.find(i));
    else if (owner[i] >= 0) root[i] = static_cast<long>(sets.find(static_cast<std::size_t>(owner[i])));
  }
  std::vector<long> first_member(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (root[i] >= 0 && first_member[root[i]] < 0) first_member[root[i]] = static_cast<long>(i);
  }
  std::vector<std::pair<long, long>> order;  // (first member, root)
  for (std::size_t r = 0; r < n; ++r) {
    if (first_member[r] >= 0) order.emplace_back(first_member[r], static_cast<long>(r));
  }
  std::sort(order.begin(), order.end());
  std::vector<int> id_of_root(n, -1);
  for (std::size_t c = 0; c < order.size(); ++c) id_of_root[order[c].second] = static_cast<int>(c);
  res.clusters.resize(order.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (root[i] < 0) {
      res.noise.push_back(i);
      continue;
    }
    const int id = id_of_root[root[i]];
    res.labels[i] = id;
    res.clusters[id].members.push_back(i);
  }
  for (auto& c : res.clusters) {
    const auto pts = gather(points, c.members);
    c.centroid = centroid_of(pts);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Triage

double cluster_volume(std::span<const Vec3> points) { return convex_hull_volume(points); }

ClusterLabel classify_volume(double volume, const CountConfig& config) {
  const double ratio = volume / config.template_volume();
  if (ratio < config.volume_lo) return ClusterLabel::tiny;
  if (ratio > config.volume_hi) return ClusterLabel::multi;
  return ClusterLabel::single;
}

void triage(std::vector<Cluster>& clusters, const CountConfig& config) {
  for (auto& c : clusters) c.label = classify_volume(c.volume, config);
}

TinyMergeResult merge_tiny(std::span<const Cluster> tiny, std::span<const Vec3> points,
                           const CountConfig& config) {
  TinyMergeResult out;
  const std::size_t n = tiny.size();
  if (n == 0) return out;
  DisjointSet sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if ((tiny[i].centroid - tiny[j].centroid).norm() < config.fruit_radius) sets.unite(i, j);
    }
  }
  std::vector<std::vector<std::size_t>> groups(n);
  for (std::size_t i = 0; i < n; ++i) groups[sets.find(i)].push_back(i);
  for (const auto& g : groups) {
    if (g.empty()) continue;
    Cluster merged;
    for (auto i : g) merged.members.insert(merged.members.end(), tiny[i].members.begin(), tiny[i].members.end());
    std::sort(merged.members.begin(), merged.members.end());
    const auto pts = gather(points, merged.members);
    merged.centroid = centroid_of(pts);
    merged.volume = g.size() == 1 ? tiny[g[0]].volume : cluster_volume(pts);
    merged.label = classify_volume(merged.volume, config);
    if (merged.label == ClusterLabel::single) out.promoted.push_back(std::move(merged));
    else out.discarded.push_back(std::move(merged));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hausdorff distance

double directed_hausdorff(std::span<const Vec3> from, std::span<const Vec3> to) {
  if (from.empty() || to.empty()) throw EmptySetError("hausdorff distance of an empty point set");
  // Early-break scan: once a point of `to` is closer than the running
  // maximum, the current point of `from` cannot raise it.
  double cmax = 0.0;
  for (const auto& a : from) {
    double cmin = std::numeric_limits<double>::infinity();
    for (const auto& b : to) {
      const double d = (a - b).squaredNorm();
      if (d < cmax) {
        cmin = d;
        break;
      }
      cmin = std::min(cmin, d);
    }
    cmax = std::max(cmax, cmin);
  }
  return std::sqrt(cmax);
}

double hausdorff(std::span<const Vec3> x, std::span<const Vec3> y) {
  return std::max(directed_hausdorff(x, y), directed_hausdorff(y, x));
}

FruitTemplate FruitTemplate::sphere(double radius, int count) {
  if (!(radius > 0.0) || count < 1) throw std::invalid_argument("template needs radius > 0 and count >= 1");
  FruitTemplate t;
  t.radius = radius;
  t.points.reserve(count);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    t.points.push_back(radius * Vec3(s * std::cos(phi), s * std::sin(phi), z).normalized());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Ward agglomeration (nearest-neighbor chain)

WardHierarchy::WardHierarchy(std::span<const Vec3> points) : n_(points.size()) {
  if (n_ == 0) return;
  std::vector<Vec3> centroid(points.begin(), points.end());
  std::vector<double> size(n_, 1.0);
  std::vector<std::size_t> active(n_);
  std::iota(active.begin(), active.end(), 0);
  std::vector<std::size_t> slot_pos(n_);  // position of a slot in `active`
  std::iota(slot_pos.begin(), slot_pos.end(), 0);

  auto cost = [&](std::size_t a, std::size_t b) {
    return size[a] * size[b] / (size[a] + size[b]) * (centroid[a] - centroid[b]).squaredNorm();
  };

  std::vector<Merge> executed;
  executed.reserve(n_ - 1);
  std::vector<std::size_t> chain;
  while (active.size() > 1) {
    if (chain.empty()) chain.push_back(*std::min_element(active.begin(), active.end()));
    const std::size_t a = chain.back();
    const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n_;
    std::size_t best = n_;
    double best_cost = std::numeric_limits<double>::infinity();
    if (prev != n_) {
      best = prev;
      best_cost = cost(a, prev);
    }
    for (const std::size_t b : active) {
      if (b == a) continue;
      const double c = cost(a, b);
      if (c < best_cost || (c == best_cost && b != prev && best != prev && b < best)) {
        best_cost = c;
        best = b;
      }
    }
    if (best == prev) {
      chain.pop_back();
      chain.pop_back();
      const std::size_t keep = std::min(a, best), drop = std::max(a, best);
      executed.push_back({keep, drop, best_cost});
      centroid[keep] = (size[keep] * centroid[keep] + size[drop] * centroid[drop]) / (size[keep] + size[drop]);
      size[keep] += size[drop];
      const std::size_t pos = slot_pos[drop];
      active[pos] = active.back();
      slot_pos[active[pos]] = pos;
      active.pop_back();
    } else {
      chain.push_back(best);
    }
  }
  merges_ = executed;
  std::stable_sort(merges_.begin(), merges_.end(),
                   [](const Merge& x, const Merge& y) { return x.height < y.height; });
}

std::vector<int> WardHierarchy::labels(int k) const {
  if (k < 1 || static_cast<std::size_t>(k) > n_) throw std::invalid_argument("k must be in [1, n]");
  DisjointSet sets(n_);
  const std::size_t applied = n_ - static_cast<std::size_t>(k);
  for (std::size_t m = 0; m < applied; ++m) sets.unite(merges_[m].a, merges_[m].b);
  std::vector<int> label(n_, -1);
  std::vector<int> id_of_root(n_, -1);
  int next = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t r = sets.find(i);
    if (id_of_root[r] < 0) id_of_root[r] = next++;
    label[i] = id_of_root[r];
  }
  return label;
}

RefineResult refine_multi(std::span<const Vec3> cluster_points, const FruitTemplate& fruit, int max_k,
                          std::span<const Vec3> hull) {
  if (cluster_points.empty()) throw EmptySetError("refine_multi on an empty cluster");
  const std::span<const Vec3> target = hull.empty() ? cluster_points : hull;
  if (max_k < 1) throw std::invalid_argument("max_k must be >= 1");
  const WardHierarchy tree(cluster_points);
  const int kmax = static_cast<int>(std::min<std::size_t>(max_k, cluster_points.size()));
  RefineResult res;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Vec3> placed;
  for (int k = 1; k <= kmax; ++k) {
    const auto labels = tree.labels(k);
    std::vector<Vec3> centers(k, Vec3::Zero());
    std::vector<double> counts(k, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      centers[labels[i]] += cluster_points[i];
      counts[labels[i]] += 1.0;
    }
    placed.clear();
    for (int c = 0; c < k; ++c) {
      centers[c] /= counts[c];
      for (const auto& t : fruit.points) placed.push_back(centers[c] + t);
    }
    const double d = std::max(directed_hausdorff(placed, cluster_points), directed_hausdorff(target, placed));
    res.distances.push_back(d);
    if (d < best) {
      best = d;
      res.k = k;
      res.centers = centers;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Full count

namespace {

// Every stride-th point so that at most `limit` remain.
std::vector<Vec3> thin(std::vector<Vec3> pts, int limit) {
  if (static_cast<int>(pts.size()) <= limit) return pts;
  const std::size_t stride = (pts.size() + limit - 1) / limit;
  std::vector<Vec3> sub;
  for (std::size_t i = 0; i < pts.size(); i += stride) sub.push_back(pts[i]);
  return sub;
}

}  // namespace

CountReport count_fruits(std::span<const Vec3> input, const CountConfig& config) {
  if (auto diag = config.diagnostics(); !diag.empty()) {
    throw std::invalid_argument("invalid count config: " + diag.front());
  }
  CountReport rep;
  rep.input_points = input.size();
  std::vector<Vec3> sorted(input.begin(), input.end());
  std::sort(sorted.begin(), sorted.end(), lex_less);
  const std::vector<Vec3> points = remove_outliers(sorted, config.outlier_radius, config.outlier_min_neighbors);
  rep.filtered_points = points.size();
  if (points.empty()) return rep;

  DbscanResult db = dbscan(points, config.dbscan_eps, config.dbscan_min_pts);
  rep.noise_points = db.noise.size();
  for (auto& c : db.clusters) c.volume = cluster_volume(gather(points, c.members));
  triage(db.clusters, config);

  std::vector<Cluster> tiny;
  for (const auto& c : db.clusters) {
    if (c.label == ClusterLabel::tiny) tiny.push_back(c);
  }
  const TinyMergeResult merged = merge_tiny(tiny, points, config);
  rep.tiny_promoted = static_cast<int>(merged.promoted.size());
  rep.tiny_discarded = static_cast<int>(merged.discarded.size());

  const FruitTemplate fruit = FruitTemplate::sphere(config.fruit_radius, config.template_points);
  auto add_single = [&](const Cluster& c) {
    rep.singles += 1;
    rep.centers.push_back(c.centroid);
    rep.clusters.push_back({ClusterLabel::single, c.centroid, c.volume, c.members.size(), 1, {}});
  };
  for (const auto& c : db.clusters) {
    if (c.label == ClusterLabel::single) {
      add_single(c);
    } else if (c.label == ClusterLabel::multi) {
      std::vector<Vec3> pts = gather(points, c.members);
      std::vector<Vec3> hull;
      if (config.hull_mode == HullMode::convex_hull) {
        for (int v : convex_hull(pts).vertices) hull.push_back(pts[v]);
      }
      pts = thin(std::move(pts), config.refine_max_points);
      const RefineResult r = refine_multi(pts, fruit, config.max_fruits_per_cluster, hull);
      rep.multi_clusters += 1;
      rep.multi_fruits += r.k;
      rep.centers.insert(rep.centers.end(), r.centers.begin(), r.centers.end());
      rep.clusters.push_back({ClusterLabel::multi, c.centroid, c.volume, c.members.size(), r.k, r.distances});
    }
  }
  for (const auto& c : merged.promoted) add_single(c);
  rep.total = rep.singles + rep.multi_fruits;
  return rep;
}

void write_count_report(const std::filesystem::path& path, const CountReport& rep, const CountConfig& config) {
  using json = nlohmann::json;
  json doc;
  doc["total"] = rep.total;
  doc["per_label"] = {{"single", rep.singles},
                      {"multi_clusters", rep.multi_clusters},
                      {"multi_fruits", rep.multi_fruits},
                      {"tiny_promoted", rep.tiny_promoted},
                      {"tiny_discarded", rep.tiny_discarded}};
  doc["points"] = {{"input", rep.input_points}, {"after_outlier_removal", rep.filtered_points},
                   {"noise", rep.noise_points}};
  doc["fruit_centers"] = json::array();
  for (const auto& c : rep.centers) doc["fruit_centers"].push_back({c.x(), c.y(), c.z()});
  doc["clusters"] = json::array();
  for (const auto& c : rep.clusters) {
    json entry = {{"label", to_string(c.label)},
                  {"centroid", {c.centroid.x(), c.centroid.y(), c.centroid.z()}},
                  {"volume", c.volume},
                  {"points", c.points},
                  {"fruits", c.fruits}};
    if (!c.scores.empty()) entry["scores"] = c.scores;
    doc["clusters"].push_back(entry);
  }
  doc["config"] = {{"outlier", {{"radius", config.outlier_radius}, {"min_neighbors", config.outlier_min_neighbors}}},
                   {"dbscan", {{"eps", config.dbscan_eps}, {"min_pts", config.dbscan_min_pts}}},
                   {"fruit_radius", config.fruit_radius},
                   {"template_points", config.template_points},
                   {"volume_band", {config.volume_lo, config.volume_hi}},
                   {"max_fruits_per_cluster", config.max_fruits_per_cluster},
                   {"hull", to_string(config.hull_mode)},
                   {"refine_max_points", config.refine_max_points}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

std::vector<Vec3> read_count_centers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto doc = nlohmann::json::parse(in);
  std::vector<Vec3> out;
  for (const auto& c : doc.at("fruit_centers")) out.emplace_back(c.at(0), c.at(1), c.at(2));
  return out;
}

}  // namespace fruitnerf
