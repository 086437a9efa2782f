#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fruitnerf/camera.hpp"
#include "fruitnerf/field.hpp"
#include "fruitnerf/render.hpp"
#include "fruitnerf/scenegen.hpp"
#include "support.hpp"

using namespace fruitnerf;

namespace {

Scene lone_fruit(const Vec3& center, double radius) {
  Scene scene;
  scene.spec.fruit_count = 1;
  scene.spec.fruit_radius = radius;
  scene.spec.trunk_density = 0.0;
  scene.spec.foliage_density = 0.0;
  scene.fruit_centers = {center};
  scene.fruit_groups = {0};
  return scene;
}

}  // namespace

TEST_SUITE("render") {
  TEST_CASE("principal ray follows the optical axis") {
    Camera cam;
    cam.fx = cam.fy = 100.0;
    cam.width = cam.height = 64;
    cam.cx = cam.cy = 32.0;
    const Ray r = generate_ray(cam, 32.0, 32.0);
    CHECK((r.direction - Vec3(0, 0, -1)).norm() < 1e-12);
    CHECK(std::abs(r.direction.norm() - 1.0) < 1e-9);
    // f pixels to the right is 45 degrees off axis.
    cam.width = 256;
    cam.cx = 32.0;
    const Ray side = generate_ray(cam, 132.0, 32.0);
    const double angle = std::acos(side.direction.dot(Vec3(0, 0, -1)));
    CHECK(angle == doctest::Approx(std::numbers::pi / 4).epsilon(1e-12));
    CHECK(side.direction.x() > 0.0);
    CHECK(std::abs(side.direction.y()) < 1e-12);
    const Ray again = generate_ray(cam, 132.0, 32.0);
    CHECK(again.direction == side.direction);
    CHECK_THROWS_AS(generate_ray(cam, -1.0, 3.0), std::out_of_range);
    CHECK_THROWS_AS(generate_ray(cam, 3.0, 65.0), std::out_of_range);
  }

  TEST_CASE("ray directions are unit length under random poses") {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
      const Camera cam = look_at_camera(Vec3(rng.uniform(1, 3), rng.uniform(1, 3), rng.uniform(1, 3)),
                                        Vec3::Zero(), 200.0, 80, 60);
      const Ray r = generate_ray(cam, rng.uniform(0, 80), rng.uniform(0, 60), 0.1, -0.2);
      CHECK(std::abs(r.direction.norm() - 1.0) < 1e-9);
    }
  }

  TEST_CASE("stratified samples") {
    Ray ray;
    ray.t_near = 1.0;
    ray.t_far = 3.0;
    const RaySamples one = stratified_samples(ray, 1, 5);
    REQUIRE(one.t.size() == 1);
    CHECK((one.t[0] >= 1.0 && one.t[0] <= 3.0));

    const RaySamples mid = stratified_samples(ray, 8, 5, false);
    for (int k = 0; k < 8; ++k) {
      CHECK(mid.t[k] == doctest::Approx(1.0 + (k + 0.5) * 0.25));
    }
    for (int k = 0; k < 7; ++k) CHECK(mid.delta[k] == doctest::Approx(0.25));

    const RaySamples jit = stratified_samples(ray, 64, 9);
    for (int k = 0; k < 64; ++k) {
      CHECK(jit.t[k] >= 1.0 + k * (2.0 / 64));
      CHECK(jit.t[k] <= 1.0 + (k + 1) * (2.0 / 64));
      CHECK(jit.delta[k] > 0.0);
      if (k > 0) CHECK(jit.t[k] > jit.t[k - 1]);
    }
    CHECK(jit.delta.back() == doctest::Approx(3.0 - jit.t.back()));
    const RaySamples same = stratified_samples(ray, 64, 9);
    CHECK(same.t == jit.t);
    CHECK_THROWS_AS(stratified_samples(ray, 0, 1), std::invalid_argument);
  }

  TEST_CASE("compositing closed forms") {
    const std::vector<double> zero(5, 0.0), delta(5, 0.1), values{1, 2, 3, 4, 5};
    Composite c = composite(zero, values, delta);
    CHECK(c.value == 0.0);
    CHECK(c.weights.opacity == 0.0);
    for (double w : c.weights.weights) CHECK(w == 0.0);

    const std::vector<double> wall{500.0, 1.0, 1.0}, d3{0.1, 0.1, 0.1}, v3{0.7, 5.0, 9.0};
    c = composite(wall, v3, d3);
    CHECK(c.weights.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.value == doctest::Approx(0.7).epsilon(1e-12));

    const std::vector<double> ln2{std::log(2.0), std::log(2.0)}, d2{1.0, 1.0}, v2{4.0, 8.0};
    c = composite(ln2, v2, d2);
    CHECK(c.weights.weights[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(c.weights.weights[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(c.value == doctest::Approx(4.0 / 2 + 8.0 / 4).epsilon(1e-12));
  }

  TEST_CASE("non-finite density is an error") {
    const std::vector<double> bad{0.1, std::nan("")}, d{0.1, 0.1};
    CHECK_THROWS_AS(composite_weights(bad, d), RenderError);
    const std::vector<double> inf{std::numeric_limits<double>::infinity()}, d1{0.1};
    CHECK_THROWS_AS(composite_weights(inf, d1), RenderError);
  }

  TEST_CASE("weights telescope to the opacity") {
    Rng rng(2);
    for (int ray = 0; ray < 500; ++ray) {
      const int n = 1 + static_cast<int>(rng.below(200));
      std::vector<double> sigma(n), delta(n);
      double depth = 0.0;
      for (int k = 0; k < n; ++k) {
        sigma[k] = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 50.0);
        delta[k] = rng.uniform(1e-4, 0.05);
        depth += sigma[k] * delta[k];
      }
      const CompositeWeights w = composite_weights(sigma, delta);
      double sum = 0.0;
      for (int k = 0; k < n; ++k) {
        CHECK(w.weights[k] >= 0.0);
        if (k > 0) CHECK(w.transmittance[k] <= w.transmittance[k - 1]);
        sum += w.weights[k];
      }
      CHECK(std::abs(sum - (1.0 - std::exp(-depth))) < 1e-9);
      CHECK(sum <= 1.0 + 1e-9);
    }
  }

  TEST_CASE("splitting an empty sample changes nothing") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> sigma(20), delta(20), v(20);
      for (int k = 0; k < 20; ++k) {
        sigma[k] = rng.uniform() < 0.4 ? 0.0 : rng.uniform(0.0, 20.0);
        delta[k] = rng.uniform(0.01, 0.1);
        v[k] = rng.uniform(-1, 1);
      }
      const double base = composite(sigma, v, delta).value;
      std::vector<double> s2, d2, v2;
      for (int k = 0; k < 20; ++k) {
        if (sigma[k] == 0.0) {
          const double f = rng.uniform(0.1, 0.9);
          s2.insert(s2.end(), {0.0, 0.0});
          d2.insert(d2.end(), {f * delta[k], (1 - f) * delta[k]});
          v2.insert(v2.end(), {v[k], rng.uniform(-1, 1)});
        } else {
          s2.push_back(sigma[k]);
          d2.push_back(delta[k]);
          v2.push_back(v[k]);
        }
      }
      CHECK(std::abs(composite(s2, v2, d2).value - base) < 1e-12);
    }
  }

  TEST_CASE("empty grid renders black") {
    FieldGrid grid(GridResolution::cube(8), Aabb::unit_cube(), {-40.0, -4.0, 0.0});
    const Camera cam = look_at_camera(Vec3(0.5, 0.5, 3.0), Vec3(0.5, 0.5, 0.5), 50.0, 16, 16);
    const PixelRender px = render_pixel(grid, cam, 8, 8);
    CHECK(px.color.norm() < 1e-12);
    CHECK(px.opacity < 1e-12);
    // Rays missing the grid see background.
    const Camera away = look_at_camera(Vec3(0.5, 0.5, 3.0), Vec3(0.5, 0.5, 9.0), 50.0, 16, 16);
    const PixelRender miss = render_pixel(grid, away, 8, 8);
    CHECK(miss.opacity == 0.0);
    CHECK(miss.color == Vec3::Zero());
  }

  TEST_CASE("voxelized red fruit renders red with fruit semantics") {
    const Scene scene = lone_fruit(Vec3(0.5, 0.5, 0.5), 0.1);
    FieldGrid grid(GridResolution::cube(64), Aabb::unit_cube());
    voxelize_scene(scene, grid);
    const Camera cam = look_at_camera(Vec3(0.5, 0.5, 2.0), Vec3(0.5, 0.5, 0.5), 100.0, 32, 32);
    RenderOptions opt;
    opt.samples_per_ray = 256;
    const PixelRender px = render_pixel(grid, cam, 16, 16, opt);
    CHECK((px.color - scene.spec.fruit_color).cwiseAbs().maxCoeff() < 0.05);
    CHECK(px.semantic >= 0.9);
    CHECK(px.opacity > 0.99);
    // Parallel and serial renders agree: same seed, same pixel, same value.
    const PixelRender again = render_pixel(grid, cam, 16, 16, opt);
    CHECK(again.color == px.color);
    CHECK(again.semantic == px.semantic);
  }
}
