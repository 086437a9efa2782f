#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fruitnerf/camera.hpp"
#include "fruitnerf/geometry.hpp"
#include "fruitnerf/hull.hpp"
#include "fruitnerf/rng.hpp"
#include "support.hpp"

using namespace fruitnerf;

TEST_SUITE("geometry") {
  TEST_CASE("box intersection") {
    const Aabb box = Aabb::unit_cube();
    auto hit = intersect_box(box, Vec3(0.5, 0.5, 2.0), Vec3(0, 0, -1));
    REQUIRE(hit);
    CHECK(hit->first == doctest::Approx(1.0));
    CHECK(hit->second == doctest::Approx(2.0));
    CHECK_FALSE(intersect_box(box, Vec3(2, 2, 2), Vec3(0, 0, -1)));
    // Origin inside starts at t = 0.
    hit = intersect_box(box, Vec3(0.5, 0.5, 0.5), Vec3(1, 0, 0));
    REQUIRE(hit);
    CHECK(hit->first == 0.0);
    CHECK(hit->second == doctest::Approx(0.5));
  }

  TEST_CASE("sphere intersection") {
    auto hit = intersect_sphere(Vec3(0, 0, -5), 1.0, Vec3::Zero(), Vec3(0, 0, -1));
    REQUIRE(hit);
    CHECK(hit->first == doctest::Approx(4.0));
    CHECK(hit->second == doctest::Approx(6.0));
    CHECK_FALSE(intersect_sphere(Vec3(0, 3, -5), 1.0, Vec3::Zero(), Vec3(0, 0, -1)));
    CHECK_FALSE(intersect_sphere(Vec3(0, 0, 5), 1.0, Vec3::Zero(), Vec3(0, 0, -1)));
  }

  TEST_CASE("look-at camera is orthonormal and faces the target") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      const Vec3 origin(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
      const Vec3 target(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      if ((origin - target).norm() < 1e-3) continue;
      const Camera cam = look_at_camera(origin, target, 300.0, 64, 48);
      CHECK_NOTHROW(cam.validate());
      CHECK(cam.forward().dot((target - origin).normalized()) > 1.0 - 1e-12);
      CHECK(cam.rotation.determinant() == doctest::Approx(1.0));
    }
    // Straight down is a degenerate up hint.
    const Camera down = look_at_camera(Vec3(0, 0, 2), Vec3::Zero(), 100.0, 8, 8);
    CHECK_NOTHROW(down.validate());
    CHECK(down.forward().z() == doctest::Approx(-1.0));
  }

  TEST_CASE("camera validation") {
    Camera cam;
    cam.fx = 0.0;
    CHECK_THROWS_AS(cam.validate(), std::invalid_argument);
    cam.fx = 1.0;
    cam.rotation(0, 0) = 1.1;
    CHECK_THROWS_AS(cam.validate(), std::invalid_argument);
  }

  TEST_CASE("derived seeds are deterministic and distinct") {
    CHECK(derive_seed(7, 1) == derive_seed(7, 1));
    CHECK(derive_seed(7, 1) != derive_seed(7, 2));
    CHECK(derive_seed(7, 1) != derive_seed(8, 1));
    CHECK(derive_seed(7, 1, 2) != derive_seed(7, 2, 1));
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    Rng c(9);
    for (int i = 0; i < 1000; ++i) {
      const double u = c.uniform();
      CHECK((u >= 0.0 && u < 1.0));
      CHECK(c.below(7) < 7u);
    }
  }

  TEST_CASE("hull of the unit cube corners") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 8; ++i) pts.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    const ConvexHull hull = convex_hull(pts);
    CHECK(std::abs(hull.volume - 1.0) < 1e-9);
    CHECK(hull.vertices.size() == 8);
    // Interior points change nothing.
    pts.emplace_back(0.5, 0.5, 0.5);
    pts.emplace_back(0.2, 0.7, 0.4);
    CHECK(std::abs(convex_hull_volume(pts) - 1.0) < 1e-9);
    CHECK(convex_hull(pts).vertices.size() == 8);
  }

  TEST_CASE("degenerate hulls have zero volume") {
    std::vector<Vec3> three{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    CHECK(convex_hull_volume(three) == 0.0);
    std::vector<Vec3> plane;
    Rng rng(1);
    for (int i = 0; i < 50; ++i) plane.emplace_back(rng.uniform(), rng.uniform(), 0.25);
    CHECK(convex_hull_volume(plane) == 0.0);
    std::vector<Vec3> same(10, Vec3(1, 2, 3));
    CHECK(convex_hull_volume(same) == 0.0);
  }

  TEST_CASE("hull of dense sphere samples approaches the ball volume") {
    Rng rng(11);
    const auto pts = testing::sphere_surface(Vec3::Zero(), 1.0, 10000, rng);
    const double ball = 4.0 / 3.0 * std::numbers::pi;
    const double v = convex_hull_volume(pts);
    CHECK(v <= ball);
    CHECK(std::abs(v - ball) / ball < 0.05);
  }

  TEST_CASE("hull contains every input point") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      const auto pts = testing::ball_samples(Vec3(rng.uniform(), rng.uniform(), rng.uniform()),
                                             rng.uniform(0.1, 2.0), 300, rng);
      const ConvexHull hull = convex_hull(pts);
      REQUIRE(hull.volume > 0.0);
      for (const auto& f : hull.faces) {
        const Vec3 n = (pts[f[1]] - pts[f[0]]).cross(pts[f[2]] - pts[f[0]]);
        for (const auto& p : pts) CHECK(n.dot(p - pts[f[0]]) <= 1e-9);
      }
      // Closed surface: V = F - E + ... Euler for a triangulated sphere.
      CHECK(hull.faces.size() == 2 * hull.vertices.size() - 4);
    }
  }

  TEST_CASE("hull volume is rigid-motion invariant") {
    Rng rng(5);
    auto pts = testing::ball_samples(Vec3::Zero(), 1.0, 500, rng);
    const double v0 = convex_hull_volume(pts);
    const Mat3 r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    for (auto& p : pts) p = r * p + Vec3(4, -2, 9);
    CHECK(convex_hull_volume(pts) == doctest::Approx(v0).epsilon(1e-9));
  }
}
