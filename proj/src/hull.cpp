#include "fruitnerf/hull.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace fruitnerf {
namespace {

struct Face {
  std::array<int, 3> v{};
  // nb[i] is the face across edge (v[i], v[(i + 1) % 3]).
  std::array<int, 3> nb{-1, -1, -1};
  Vec3 normal = Vec3::Zero();
  double offset = 0.0;
  std::vector<int> outside;
  bool alive = true;
  int stamp = 0;
};

class Quickhull {
 public:
  Quickhull(std::span<const Vec3> pts) : p_(pts) {}

  ConvexHull run() {
    ConvexHull out;
    if (p_.size() < 4) return out;
    Vec3 lo = p_[0], hi = p_[0];
    for (const auto& q : p_) {
      lo = lo.cwiseMin(q);
      hi = hi.cwiseMax(q);
    }
    const double scale = std::max((hi - lo).norm(), std::max(lo.cwiseAbs().maxCoeff(), hi.cwiseAbs().maxCoeff()));
    if (scale == 0.0) return out;
    eps_ = 1e-10 * scale;
    if (!initial_simplex()) return out;

    for (;;) {
      int f = -1;
      while (!pending_.empty()) {
        const int c = pending_.back();
        if (faces_[c].alive && !faces_[c].outside.empty()) {
          f = c;
          break;
        }
        pending_.pop_back();
      }
      if (f < 0) break;
      add_point(f);
    }

    std::vector<char> used(p_.size(), 0);
    const Vec3 ref = p_[faces_[0].v[0]];
    for (const auto& face : faces_) {
      if (!face.alive) continue;
      out.faces.push_back(face.v);
      const Vec3 a = p_[face.v[0]] - ref, b = p_[face.v[1]] - ref, c = p_[face.v[2]] - ref;
      out.volume += a.dot(b.cross(c)) / 6.0;
      for (int i : face.v) used[i] = 1;
    }
    for (std::size_t i = 0; i < used.size(); ++i) {
      if (used[i]) out.vertices.push_back(static_cast<int>(i));
    }
    return out;
  }

 private:
  double dist(const Face& f, int i) const { return f.normal.dot(p_[i]) - f.offset; }

  void set_plane(Face& f) const {
    const Vec3& a = p_[f.v[0]];
    Vec3 n = (p_[f.v[1]] - a).cross(p_[f.v[2]] - a);
    const double len = n.norm();
    f.normal = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
    f.offset = f.normal.dot(a);
  }

  bool initial_simplex() {
    // Extreme points along the axes seed the first edge.
    std::array<int, 6> ext{0, 0, 0, 0, 0, 0};
    for (int i = 0; i < static_cast<int>(p_.size()); ++i) {
      for (int a = 0; a < 3; ++a) {
        if (p_[i][a] < p_[ext[2 * a]][a]) ext[2 * a] = i;
        if (p_[i][a] > p_[ext[2 * a + 1]][a]) ext[2 * a + 1] = i;
      }
    }
    int i0 = ext[0], i1 = ext[1];
    double best = -1.0;
    for (int x = 0; x < 6; ++x) {
      for (int y = x + 1; y < 6; ++y) {
        const double d = (p_[ext[x]] - p_[ext[y]]).squaredNorm();
        if (d > best) {
          best = d;
          i0 = ext[x];
          i1 = ext[y];
        }
      }
    }
    if (std::sqrt(best) <= eps_) return false;

    const Vec3 dir = (p_[i1] - p_[i0]).normalized();
    int i2 = -1;
    best = eps_;
    for (int i = 0; i < static_cast<int>(p_.size()); ++i) {
      const Vec3 r = p_[i] - p_[i0];
      const double d = (r - r.dot(dir) * dir).norm();
      if (d > best) {
        best = d;
        i2 = i;
      }
    }
    if (i2 < 0) return false;

    const Vec3 n = (p_[i1] - p_[i0]).cross(p_[i2] - p_[i0]).normalized();
    int i3 = -1;
    best = eps_;
    for (int i = 0; i < static_cast<int>(p_.size()); ++i) {
      const double d = std::abs(n.dot(p_[i] - p_[i0]));
      if (d > best) {
        best = d;
        i3 = i;
      }
    }
    if (i3 < 0) return false;

    const std::array<int, 4> tet{i0, i1, i2, i3};
    const Vec3 centroid = 0.25 * (p_[i0] + p_[i1] + p_[i2] + p_[i3]);
    const int tri[4][3] = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
    for (const auto& t : tri) {
      Face f;
      f.v = {tet[t[0]], tet[t[1]], tet[t[2]]};
      set_plane(f);
      if (f.normal.dot(centroid) - f.offset > 0.0) {
        std::swap(f.v[1], f.v[2]);
        set_plane(f);
      }
      faces_.push_back(f);
    }
    // Adjacency via shared directed edges.
    std::unordered_map<long long, int> edge_owner;
    auto key = [&](int a, int b) { return static_cast<long long>(a) * static_cast<long long>(p_.size()) + b; };
    for (int fi = 0; fi < 4; ++fi) {
      for (int e = 0; e < 3; ++e) edge_owner[key(faces_[fi].v[e], faces_[fi].v[(e + 1) % 3])] = fi;
    }
    for (int fi = 0; fi < 4; ++fi) {
      for (int e = 0; e < 3; ++e) {
        faces_[fi].nb[e] = edge_owner.at(key(faces_[fi].v[(e + 1) % 3], faces_[fi].v[e]));
      }
    }

    for (int i = 0; i < static_cast<int>(p_.size()); ++i) {
      if (i == i0 || i == i1 || i == i2 || i == i3) continue;
      assign(i, std::array<int, 4>{0, 1, 2, 3});
    }
    for (int fi = 0; fi < 4; ++fi) pending_.push_back(fi);
    return true;
  }

  template <typename Range>
  void assign(int i, const Range& candidates) {
    int best_face = -1;
    double best = eps_;
    for (int fi : candidates) {
      const double d = dist(faces_[fi], i);
      if (d > best) {
        best = d;
        best_face = fi;
      }
    }
    if (best_face >= 0) faces_[best_face].outside.push_back(i);
  }

  void add_point(int start) {
    Face& sf = faces_[start];
    int eye = sf.outside.front();
    double far = dist(sf, eye);
    for (int i : sf.outside) {
      const double d = dist(sf, i);
      if (d > far) {
        far = d;
        eye = i;
      }
    }

    // Visible region and its horizon.
    ++stamp_;
    std::vector<int> visible{start};
    faces_[start].stamp = stamp_;
    struct HorizonEdge {
      int a, b, other;
    };
    std::vector<HorizonEdge> horizon;
    for (std::size_t q = 0; q < visible.size(); ++q) {
      const int fi = visible[q];
      for (int e = 0; e < 3; ++e) {
        const int nb = faces_[fi].nb[e];
        if (faces_[nb].stamp == stamp_) continue;
        if (dist(faces_[nb], eye) > eps_) {
          faces_[nb].stamp = stamp_;
          visible.push_back(nb);
        }
      }
    }
    for (int fi : visible) {
      for (int e = 0; e < 3; ++e) {
        const int nb = faces_[fi].nb[e];
        if (faces_[nb].stamp != stamp_) {
          horizon.push_back({faces_[fi].v[e], faces_[fi].v[(e + 1) % 3], nb});
        }
      }
    }

    std::vector<int> orphans;
    for (int fi : visible) {
      faces_[fi].alive = false;
      for (int i : faces_[fi].outside) {
        if (i != eye) orphans.push_back(i);
      }
      faces_[fi].outside.clear();
      faces_[fi].outside.shrink_to_fit();
    }

    std::unordered_map<int, int> by_start, by_end;
    std::vector<int> created;
    for (const auto& h : horizon) {
      Face f;
      f.v = {h.a, h.b, eye};
      set_plane(f);
      f.nb[0] = h.other;
      const int id = static_cast<int>(faces_.size());
      Face& other = faces_[h.other];
      for (int e = 0; e < 3; ++e) {
        if (other.v[e] == h.b && other.v[(e + 1) % 3] == h.a) other.nb[e] = id;
      }
      faces_.push_back(f);
      by_start[h.a] = id;
      by_end[h.b] = id;
      created.push_back(id);
    }
    for (int id : created) {
      Face& f = faces_[id];
      // Edge (b, eye) is shared with the face whose horizon edge starts at b;
      // edge (eye, a) with the one whose horizon edge ends at a.
      f.nb[1] = by_start.at(f.v[1]);
      f.nb[2] = by_end.at(f.v[0]);
    }
    for (int i : orphans) assign(i, created);
    for (int id : created) {
      if (!faces_[id].outside.empty()) pending_.push_back(id);
    }
  }

  std::span<const Vec3> p_;
  double eps_ = 0.0;
  std::vector<Face> faces_;
  std::vector<int> pending_;
  int stamp_ = 0;
};

}  // namespace

ConvexHull convex_hull(std::span<const Vec3> points) { return Quickhull(points).run(); }

double convex_hull_volume(std::span<const Vec3> points) { return convex_hull(points).volume; }

}  // namespace fruitnerf
