#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "fruitnerf/count.hpp"
#include "fruitnerf/export.hpp"
#include "fruitnerf/field.hpp"
#include "fruitnerf/hull.hpp"
#include "fruitnerf/scenegen.hpp"
#include "oracles.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace fruitnerf;

namespace {

double ball_volume(double r) { return 4.0 / 3.0 * std::numbers::pi * r * r * r; }

// Naive Ward agglomeration: merge the pair with the smallest variance
// increase until k clusters remain.
std::vector<int> naive_ward(const std::vector<Vec3>& pts, int k) {
  struct Group {
    std::vector<std::size_t> members;
    Vec3 mean;
  };
  std::vector<Group> groups;
  for (std::size_t i = 0; i < pts.size(); ++i) groups.push_back({{i}, pts[i]});
  while (static_cast<int>(groups.size()) > k) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 1;
    for (std::size_t a = 0; a < groups.size(); ++a) {
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        const double na = groups[a].members.size(), nb = groups[b].members.size();
        const double cost = na * nb / (na + nb) * (groups[a].mean - groups[b].mean).squaredNorm();
        if (cost < best) {
          best = cost;
          ba = a;
          bb = b;
        }
      }
    }
    const double na = groups[ba].members.size(), nb = groups[bb].members.size();
    groups[ba].mean = (na * groups[ba].mean + nb * groups[bb].mean) / (na + nb);
    groups[ba].members.insert(groups[ba].members.end(), groups[bb].members.begin(), groups[bb].members.end());
    groups.erase(groups.begin() + bb);
  }
  std::vector<int> labels(pts.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto i : groups[g].members) labels[i] = static_cast<int>(g);
  }
  return testing::canonical_labels(labels);
}

std::vector<Vec3> scene_cloud(const SceneSpec& spec, Scene* out_scene = nullptr) {
  const Scene scene = generate_scene(spec);
  FieldGrid grid(GridResolution::cube(128), spec.bounds);
  voxelize_scene(scene, grid);
  if (out_scene) *out_scene = scene;
  return sample_volume(grid, ExportConfig{}).points;
}

}  // namespace

TEST_SUITE("count") {
  TEST_CASE("outlier removal") {
    const std::vector<Vec3> lone{Vec3(0, 0, 0)};
    CHECK(remove_outliers(lone, 1.0, 1).empty());
    CHECK(remove_outliers({}, 1.0, 1).empty());
    Rng rng(1);
    auto blob = testing::ball_samples(Vec3::Zero(), 0.4, 100, rng);
    CHECK(remove_outliers(blob, 1.0, 5).size() == 100);
    blob.emplace_back(10, 10, 10);
    const auto kept = remove_outliers(blob, 1.0, 5);
    CHECK(kept.size() == 100);
    for (const auto& p : kept) CHECK(p.norm() <= 0.4 * std::sqrt(3.0));
  }

  TEST_CASE("outlier removal matches a pair count") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
      const auto pts = testing::random_instance(rng, 150);
      const double radius = rng.uniform(0.2, 1.0);
      const int min_nb = 1 + static_cast<int>(rng.below(6));
      std::vector<Vec3> expected;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        int c = 0;
        for (std::size_t j = 0; j < pts.size(); ++j) c += i != j && (pts[i] - pts[j]).norm() <= radius;
        if (c >= min_nb) expected.push_back(pts[i]);
      }
      CHECK(remove_outliers(pts, radius, min_nb) == expected);
    }
  }

  TEST_CASE("DBSCAN examples") {
    Rng rng(3);
    auto a = testing::ball_samples(Vec3::Zero(), 0.5, 50, rng);
    const auto b = testing::ball_samples(Vec3(10, 0, 0), 0.5, 50, rng);
    a.insert(a.end(), b.begin(), b.end());
    DbscanResult r = dbscan(a, 1.0, 3);
    CHECK(r.clusters.size() == 2);
    CHECK(r.noise.empty());

    CHECK(dbscan({}, 1.0, 3).clusters.empty());

    std::vector<Vec3> far;
    for (int i = 0; i < 5; ++i) far.emplace_back(3.0 * i, 0, 0);
    r = dbscan(far, 1.0, 3);
    CHECK(r.clusters.empty());
    CHECK(r.noise.size() == 5);
  }

  TEST_CASE("DBSCAN equals the brute-force reachability partition") {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
      const auto pts = testing::random_instance(rng, 200);
      const double eps = rng.uniform(0.2, 1.2);
      const int min_pts = 1 + static_cast<int>(rng.below(8));
      const DbscanResult r = dbscan(pts, eps, min_pts);
      CHECK(testing::canonical_labels(r.labels) == testing::brute_force_dbscan(pts, eps, min_pts));
      std::size_t members = 0;
      for (const auto& c : r.clusters) {
        CHECK_FALSE(c.members.empty());
        members += c.members.size();
      }
      CHECK(members + r.noise.size() == pts.size());
    }
  }

  TEST_CASE("DBSCAN labels do not depend on input order") {
    Rng rng(5);
    std::mt19937_64 shuffle_rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const auto pts = testing::random_instance(rng, 200);
      std::vector<std::size_t> perm(pts.size());
      for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      std::shuffle(perm.begin(), perm.end(), shuffle_rng);
      std::vector<Vec3> shuffled(pts.size());
      for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = pts[perm[i]];
      const auto a = dbscan(pts, 0.7, 4).labels;
      const auto b = dbscan(shuffled, 0.7, 4).labels;
      std::vector<int> back(pts.size());
      for (std::size_t i = 0; i < perm.size(); ++i) back[perm[i]] = b[i];
      CHECK(testing::canonical_labels(back) == testing::canonical_labels(a));
    }
  }

  TEST_CASE("cluster volume") {
    std::vector<Vec3> cube;
    for (int i = 0; i < 8; ++i) cube.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    CHECK(std::abs(cluster_volume(cube) - 1.0) < 1e-9);
    const std::vector<Vec3> three{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    CHECK(cluster_volume(three) == 0.0);
    Rng rng(6);
    const auto sphere = testing::sphere_surface(Vec3::Zero(), 1.0, 10000, rng);
    CHECK(std::abs(cluster_volume(sphere) - ball_volume(1.0)) / ball_volume(1.0) < 0.05);
  }

  TEST_CASE("triage by volume ratio") {
    CountConfig cfg;
    cfg.fruit_radius = 1.0;
    CHECK(classify_volume(4.0, cfg) == ClusterLabel::single);
    CHECK(classify_volume(12.0, cfg) == ClusterLabel::multi);
    CHECK(classify_volume(0.1, cfg) == ClusterLabel::tiny);
    // Band edges are inclusive.
    CHECK(classify_volume(0.3 * cfg.template_volume(), cfg) == ClusterLabel::single);
    CHECK(classify_volume(1.8 * cfg.template_volume(), cfg) == ClusterLabel::single);

    std::vector<Cluster> clusters(3);
    clusters[0].volume = 4.0;
    clusters[1].volume = 12.0;
    clusters[2].volume = 0.1;
    triage(clusters, cfg);
    CHECK(clusters[0].label == ClusterLabel::single);
    CHECK(clusters[1].label == ClusterLabel::multi);
    CHECK(clusters[2].label == ClusterLabel::tiny);
  }

  TEST_CASE("config validation") {
    CountConfig cfg;
    CHECK(cfg.diagnostics().empty());
    cfg.dbscan_eps = 0.0;
    cfg.max_fruits_per_cluster = 1;
    cfg.volume_lo = 1.2;
    CHECK(cfg.diagnostics().size() == 3);
    CHECK_THROWS_AS(count_fruits({}, cfg), std::invalid_argument);
    CHECK(parse_hull_mode("points") == HullMode::points);
    CHECK(std::string(to_string(HullMode::convex_hull)) == "convex_hull");
    CHECK_THROWS_AS(parse_hull_mode("shell"), std::invalid_argument);
  }

  TEST_CASE("tiny halves of one fruit merge into a single") {
    CountConfig cfg;
    cfg.fruit_radius = 1.0;
    // Raise the band floor so a half ball counts as tiny.
    cfg.volume_lo = 0.6;
    Rng rng(7);
    const auto ball = testing::ball_samples(Vec3(5, 5, 5), 1.0, 4000, rng);
    std::vector<Vec3> pts;
    Cluster top, bottom;
    for (const auto& p : ball) {
      (p.z() >= 5 ? top : bottom).members.push_back(pts.size());
      pts.push_back(p);
    }
    for (Cluster* c : {&top, &bottom}) {
      std::vector<Vec3> sub;
      for (auto i : c->members) sub.push_back(pts[i]);
      c->volume = cluster_volume(sub);
      c->centroid = Vec3::Zero();
      for (const auto& p : sub) c->centroid += p;
      c->centroid /= static_cast<double>(sub.size());
      c->label = classify_volume(c->volume, cfg);
      REQUIRE(c->label == ClusterLabel::tiny);
    }
    CHECK((top.centroid - bottom.centroid).norm() < cfg.fruit_radius);
    const std::vector<Cluster> tiny{top, bottom};
    const TinyMergeResult r = merge_tiny(tiny, pts, cfg);
    REQUIRE(r.promoted.size() == 1);
    CHECK(r.discarded.empty());
    CHECK(r.promoted[0].members.size() == pts.size());
    CHECK((r.promoted[0].centroid - Vec3(5, 5, 5)).norm() < 0.05);
  }

  TEST_CASE("an isolated speck is discarded") {
    CountConfig cfg;
    cfg.fruit_radius = 1.0;
    std::vector<Vec3> pts;
    Rng rng(8);
    Cluster speck;
    for (int i = 0; i < 5; ++i) {
      speck.members.push_back(pts.size());
      pts.emplace_back(20 + 1e-4 * rng.uniform(), 1e-4 * rng.uniform(), 1e-4 * rng.uniform());
    }
    speck.centroid = pts[0];
    speck.volume = cluster_volume(pts);
    speck.label = ClusterLabel::tiny;
    const std::vector<Cluster> tiny{speck};
    const TinyMergeResult r = merge_tiny(tiny, pts, cfg);
    CHECK(r.promoted.empty());
    CHECK(r.discarded.size() == 1);
    CHECK(merge_tiny({}, pts, cfg).promoted.empty());
  }

  TEST_CASE("Hausdorff distance") {
    const std::vector<Vec3> x{Vec3(0, 0, 0)}, y{Vec3(3, 4, 0)};
    CHECK(hausdorff(x, y) == 5.0);
    CHECK(hausdorff(x, x) == 0.0);
    const std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 0, 0)}, mid{Vec3(0.4, 0, 0)};
    CHECK(hausdorff(line, mid) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(directed_hausdorff(mid, line) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK_THROWS_AS(hausdorff({}, x), EmptySetError);
    CHECK_THROWS_AS(hausdorff(x, {}), EmptySetError);
  }

  TEST_CASE("Hausdorff matches brute force and is a metric") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
      const auto a = testing::random_instance(rng, 120);
      const auto b = testing::random_instance(rng, 120);
      const auto c = testing::random_instance(rng, 120);
      if (a.empty() || b.empty() || c.empty()) continue;
      const double ab = hausdorff(a, b);
      CHECK(std::abs(ab - testing::brute_force_hausdorff(a, b)) <= 1e-12);
      CHECK(ab == hausdorff(b, a));
      CHECK(hausdorff(a, a) == 0.0);
      CHECK(hausdorff(a, c) <= ab + hausdorff(b, c) + 1e-9);
    }
  }

  TEST_CASE("fruit template") {
    const FruitTemplate t = FruitTemplate::sphere(0.04, 256);
    REQUIRE(t.points.size() == 256);
    Vec3 mean = Vec3::Zero();
    for (const auto& p : t.points) {
      CHECK(std::abs(p.norm() - 0.04) < 1e-9);
      mean += p;
    }
    CHECK(mean.norm() / 256 < 1e-3 * 0.04);
    const FruitTemplate u = FruitTemplate::sphere(0.04, 256);
    CHECK(u.points == t.points);
  }

  TEST_CASE("Ward hierarchy matches naive agglomeration") {
    Rng rng(10);
    for (int trial = 0; trial < 30; ++trial) {
      const auto pts = testing::ball_samples(Vec3::Zero(), 1.0, 5 + static_cast<int>(rng.below(40)), rng);
      const WardHierarchy ward(pts);
      CHECK(ward.size() == pts.size());
      for (int k = 1; k <= std::min<int>(8, static_cast<int>(pts.size())); ++k) {
        CHECK(testing::canonical_labels(ward.labels(k)) == naive_ward(pts, k));
      }
    }
  }

  TEST_CASE("refinement recovers the group size") {
    const double r = 0.04;
    const FruitTemplate fruit = FruitTemplate::sphere(r, 256);
    Rng rng(11);
    for (int k = 1; k <= 6; ++k) {
      for (int trial = 0; trial < 5; ++trial) {
        const auto centers = testing::fruit_group(k, r, rng);
        const auto surface = testing::fruit_group_cloud(centers, r, 300, testing::Fill::surface, rng);
        const RefineResult a = refine_multi(surface, fruit, 6);
        CAPTURE(k);
        CHECK(a.k == k);
        CHECK(a.centers.size() == static_cast<std::size_t>(a.k));
        CHECK(a.distances.size() == 6);
        // Solid clouds scored against their hull vertices.
        const auto solid = testing::fruit_group_cloud(centers, r, 600, testing::Fill::solid, rng);
        std::vector<Vec3> hull;
        for (int v : convex_hull(solid).vertices) hull.push_back(solid[v]);
        CHECK(refine_multi(solid, fruit, 6, hull).k == k);
      }
    }
  }

  TEST_CASE("refinement brute-force scores") {
    const double r = 0.04;
    const FruitTemplate fruit = FruitTemplate::sphere(r, 128);
    Rng rng(12);
    const auto centers = testing::fruit_group(3, r, rng);
    const auto pts = testing::fruit_group_cloud(centers, r, 200, testing::Fill::surface, rng);
    const RefineResult res = refine_multi(pts, fruit, 6);
    const WardHierarchy ward(pts);
    for (int k = 1; k <= 6; ++k) {
      const auto labels = ward.labels(k);
      std::vector<Vec3> sum(k, Vec3::Zero());
      std::vector<int> n(k, 0);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        sum[labels[i]] += pts[i];
        ++n[labels[i]];
      }
      std::vector<Vec3> placed;
      for (int c = 0; c < k; ++c) {
        for (const auto& t : fruit.points) placed.push_back(sum[c] / n[c] + t);
      }
      CHECK(res.distances[k - 1] == doctest::Approx(testing::brute_force_hausdorff(placed, pts)).epsilon(1e-12));
    }
    CHECK(res.k == 3);
  }

  TEST_CASE("refinement tie-break and compact clusters") {
    const double r = 0.04;
    const FruitTemplate fruit = FruitTemplate::sphere(r, 256);
    Rng rng(13);
    // Two coincident spheres are indistinguishable from one.
    auto pts = testing::sphere_surface(Vec3::Zero(), r, 400, rng);
    const auto twin = testing::sphere_surface(Vec3::Zero(), r, 400, rng);
    pts.insert(pts.end(), twin.begin(), twin.end());
    CHECK(refine_multi(pts, fruit, 6).k == 1);
    // A solid blob within r of its centroid is one fruit when scored
    // against its hull.
    for (int trial = 0; trial < 10; ++trial) {
      const auto blob = testing::ball_samples(Vec3(rng.uniform(), rng.uniform(), rng.uniform()), r, 500, rng);
      std::vector<Vec3> hull;
      for (int v : convex_hull(blob).vertices) hull.push_back(blob[v]);
      CHECK(refine_multi(blob, fruit, 6, hull).k == 1);
    }
    CHECK_THROWS_AS(refine_multi({}, fruit, 6), EmptySetError);
  }

  TEST_CASE("empty cloud counts zero") {
    const CountReport rep = count_fruits({}, CountConfig{});
    CHECK(rep.total == 0);
    CHECK(rep.centers.empty());
  }

  TEST_CASE("ten separated fruits") {
    SceneSpec spec;
    spec.seed = 21;
    spec.fruit_count = 10;
    spec.cluster_fraction = 0.0;
    Scene scene;
    const auto cloud = scene_cloud(spec, &scene);
    const CountReport rep = count_fruits(cloud, CountConfig{});
    CHECK(rep.total == 10);
    CHECK(rep.singles == 10);
    REQUIRE(rep.centers.size() == 10);
    for (const auto& gt : scene.fruit_centers) {
      double best = 1e9;
      for (const auto& c : rep.centers) best = std::min(best, (c - gt).norm());
      CHECK(best < 0.25 * spec.fruit_radius);
    }

    SUBCASE("permutation and rigid motion leave the count unchanged") {
      std::vector<Vec3> shuffled = cloud;
      std::mt19937_64 g(3);
      std::shuffle(shuffled.begin(), shuffled.end(), g);
      CHECK(count_fruits(shuffled, CountConfig{}).total == 10);
      const Mat3 rot = Eigen::AngleAxisd(1.1, Vec3(0.3, -0.5, 0.8).normalized()).toRotationMatrix();
      std::vector<Vec3> moved;
      for (const auto& p : cloud) moved.push_back(rot * p + Vec3(2.0, -1.0, 0.5));
      CHECK(count_fruits(moved, CountConfig{}).total == 10);
    }
  }

  TEST_CASE("four fruits with one touching pair") {
    SceneSpec spec;
    spec.seed = 22;
    spec.fruit_count = 4;
    spec.cluster_fraction = 0.5;
    Scene scene;
    const auto cloud = scene_cloud(spec, &scene);
    REQUIRE(std::set<int>(scene.fruit_groups.begin(), scene.fruit_groups.end()).size() == 3);
    const CountReport rep = count_fruits(cloud, CountConfig{});
    CHECK(rep.total == 4);
    CHECK(rep.multi_clusters == 1);
    CHECK(rep.multi_fruits == 2);
    CHECK(rep.singles == 2);
  }

  TEST_CASE("count report round trip") {
    testing::TempDir dir("count");
    Rng rng(14);
    auto pts = testing::fruit_group_cloud({Vec3(0.3, 0.3, 0.3), Vec3(0.7, 0.7, 0.7)}, 0.04, 2000,
                                          testing::Fill::solid, rng);
    const CountReport rep = count_fruits(pts, CountConfig{});
    CHECK(rep.total == 2);
    write_count_report(dir.path() / "r.json", rep, CountConfig{});
    const auto centers = read_count_centers(dir.path() / "r.json");
    REQUIRE(centers.size() == rep.centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i) CHECK((centers[i] - rep.centers[i]).norm() < 1e-12);
    std::ifstream in(dir.path() / "r.json");
    const auto doc = nlohmann::json::parse(in);
    CHECK(doc["total"] == 2);
    CHECK(doc["per_label"]["single"] == 2);
    CHECK(doc["config"]["hull"] == "convex_hull");
  }
}
