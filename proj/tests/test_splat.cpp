#include "arthoi/splat.hpp"

#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"

using namespace arthoi;

namespace {

PinholeCamera test_camera(int size = 100, double f = 100.0) {
  PinholeCamera cam;
  cam.fx = cam.fy = f;
  cam.cx = cam.cy = size / 2.0;
  cam.width = cam.height = size;
  cam.world_to_camera = RigidTransform::identity();
  return cam;
}

// The footprint formula evaluated independently of the renderer internals.
double footprint_reference(double opacity, double dist_px, double rho,
                           double trunc = 3.0) {
  const double s = dist_px / rho;
  double w = 1.0;
  const double s0 = trunc - 0.5;
  if (s >= trunc) {
    w = 0.0;
  } else if (s > s0) {
    const double x = (trunc - s) / 0.5;
    w = x * x * (3.0 - 2.0 * x);
  }
  return opacity * std::exp(-dist_px * dist_px / (2.0 * rho * rho)) * w;
}

std::mt19937_64 rng(123);

std::vector<Splat> random_scene(int n, double opacity_max = 0.95) {
  std::uniform_real_distribution<double> dx(-0.2, 0.2);
  std::uniform_real_distribution<double> dz(0.8, 2.0);
  std::uniform_real_distribution<double> dr(0.02, 0.08);
  std::uniform_real_distribution<double> dop(0.2, opacity_max);
  std::vector<Splat> splats(static_cast<size_t>(n));
  for (Splat& s : splats) {
    s.mean = Vec3(dx(rng), dx(rng), dz(rng));
    s.radius = dr(rng);
    s.opacity = dop(rng);
  }
  return splats;
}

double render_weighted_sum(const std::vector<Splat>& splats,
                           const PinholeCamera& cam, const AlphaImage& residual,
                           const RenderConfig& rc) {
  const AlphaImage img = render_silhouette(splats, cam, rc);
  double sum = 0.0;
  for (size_t i = 0; i < img.data.size(); ++i) {
    sum += residual.data[i] * img.data[i];
  }
  return sum;
}

}  // namespace

TEST_CASE("empty splat list renders an all-zero image") {
  const PinholeCamera cam = test_camera();
  const AlphaImage img = render_silhouette({}, cam);
  for (double v : img.data) CHECK(v == 0.0);
}

TEST_CASE("single splat: peak at center, monotone decay") {
  const PinholeCamera cam = test_camera();
  Splat s;
  s.mean = Vec3(0, 0, 1.0);
  s.radius = 0.05;  // projected rho = 5 px
  s.opacity = 1.0;
  const AlphaImage img = render_silhouette({s}, cam);
  const int cx = 50, cy = 50;
  CHECK(img.at(cx, cy) == doctest::Approx(1.0).epsilon(1e-12));

  const double rho = s.radius * cam.fx / 1.0;
  CHECK(img.at(cx + 2, cy) ==
        doctest::Approx(footprint_reference(1.0, 2.0, rho)).epsilon(1e-12));
  double prev = img.at(cx, cy);
  for (int d = 1; d < 20; ++d) {
    const double cur = img.at(cx + d, cy);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
}

TEST_CASE("two coincident half-opacity splats composite to 0.75") {
  const PinholeCamera cam = test_camera();
  Splat s;
  s.mean = Vec3(0, 0, 1.0);
  s.radius = 0.05;
  s.opacity = 0.5;
  const AlphaImage img = render_silhouette({s, s}, cam);
  CHECK(img.at(50, 50) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("alpha saturates below one for any splat count") {
  const PinholeCamera cam = test_camera();
  for (int trial = 0; trial < 20; ++trial) {
    const auto splats = random_scene(30, 1.0);
    const AlphaImage img = render_silhouette(splats, cam);
    for (double v : img.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("equal-depth splats at distinct pixels commute") {
  const PinholeCamera cam = test_camera();
  Splat a, b;
  a.mean = Vec3(-0.1, 0, 1.0);
  b.mean = Vec3(0.1, 0, 1.0);
  a.radius = b.radius = 0.03;
  a.opacity = 0.8;
  b.opacity = 0.6;
  const AlphaImage i1 = render_silhouette({a, b}, cam);
  const AlphaImage i2 = render_silhouette({b, a}, cam);
  for (size_t i = 0; i < i1.data.size(); ++i) {
    CHECK(i1.data[i] == doctest::Approx(i2.data[i]).epsilon(1e-14));
  }
}

TEST_CASE("depth map basics") {
  const PinholeCamera cam = test_camera();
  SUBCASE("empty list -> all empty") {
    const DepthImage d = render_depth({}, cam);
    CHECK(d.empty_at(50, 50));
  }
  SUBCASE("nearest of two splats on one ray wins") {
    Splat near, far;
    near.mean = Vec3(0, 0, 1.0);
    far.mean = Vec3(0, 0, 2.0);
    near.radius = far.radius = 0.05;
    near.opacity = far.opacity = 1.0;
    const DepthImage d = render_depth({far, near}, cam);
    CHECK(d.at(50, 50) == doctest::Approx(1.0));
  }
  SUBCASE("single splat depth at its center pixel") {
    Splat s;
    s.mean = Vec3(0, 0, 3.0);
    s.radius = 0.1;
    s.opacity = 1.0;
    const DepthImage d = render_depth({s}, cam);
    CHECK(d.at(50, 50) == doctest::Approx(3.0));
  }
}

TEST_CASE("depth map is monotone under splat removal") {
  const PinholeCamera cam = test_camera();
  for (int trial = 0; trial < 10; ++trial) {
    auto splats = random_scene(12);
    const DepthImage full = render_depth(splats, cam);
    auto reduced = splats;
    reduced.erase(reduced.begin() + (trial % int(reduced.size())));
    const DepthImage sub = render_depth(reduced, cam);
    for (size_t i = 0; i < full.data.size(); ++i) {
      CHECK(sub.data[i] >= full.data[i] - 1e-15);
    }
  }
}

TEST_CASE("backward: zero residual gives zero gradients") {
  const PinholeCamera cam = test_camera();
  const auto splats = random_scene(5);
  const AlphaImage residual(cam.width, cam.height, 0.0);
  for (const Vec3& g : silhouette_backward(splats, cam, residual)) {
    CHECK(g.norm() == 0.0);
  }
}

TEST_CASE("backward: residual right of center pulls the splat right") {
  const PinholeCamera cam = test_camera();
  Splat s;
  s.mean = Vec3(0, 0, 1.0);
  s.radius = 0.05;
  s.opacity = 0.9;
  AlphaImage residual(cam.width, cam.height, 0.0);
  residual.at(54, 50) = 1.0;  // right of the center pixel (50,50)
  const auto grads = silhouette_backward({s}, cam, residual);
  // d(sum residual*alpha)/dx > 0: moving right increases alpha there.
  CHECK(grads[0].x() > 0.0);
  CHECK(std::abs(grads[0].y()) < 1e-12);
}

TEST_CASE("backward matches central finite differences") {
  std::uniform_real_distribution<double> dres(-1.0, 1.0);
  const PinholeCamera cam = test_camera(64, 70.0);
  const double h = 1e-4;
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 5 + trial * 3;  // up to 20 splats
    auto splats = random_scene(n);
    AlphaImage residual(cam.width, cam.height, 0.0);
    for (double& v : residual.data) v = dres(rng);

    const auto analytic = silhouette_backward(splats, cam, residual);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < 3; ++k) {
        auto plus = splats;
        plus[size_t(i)].mean[k] += h;
        auto minus = splats;
        minus[size_t(i)].mean[k] -= h;
        const double numeric =
            (render_weighted_sum(plus, cam, residual, RenderConfig()) -
             render_weighted_sum(minus, cam, residual, RenderConfig())) /
            (2.0 * h);
        const double denom = std::max(
            {std::abs(analytic[size_t(i)][k]), std::abs(numeric), 1e-8});
        CHECK(std::abs(numeric - analytic[size_t(i)][k]) / denom < 1e-3);
      }
    }
  }
}

TEST_CASE("binarize and composite") {
  AlphaImage a(2, 1, 0.0), b(2, 1, 0.0);
  a.data = {0.6, 0.2};
  b.data = {0.5, 0.5};
  const Mask m = binarize(a, 0.5);
  CHECK(m.data[0] == 1);
  CHECK(m.data[1] == 0);
  const AlphaImage c = composite_alpha(a, b);
  CHECK(c.data[0] == doctest::Approx(1.0 - 0.4 * 0.5));
  CHECK(c.data[1] == doctest::Approx(1.0 - 0.8 * 0.5));
}

TEST_CASE("PGM mask round trip") {
  const auto path = std::filesystem::temp_directory_path() / "arthoi_test.pgm";
  Mask m(7, 5, 0);
  m.at(3, 2) = 1;
  m.at(0, 0) = 1;
  m.at(6, 4) = 1;
  write_pgm(path.string(), m);
  const Mask r = read_pgm_mask(path.string());
  REQUIRE(r.width == m.width);
  REQUIRE(r.height == m.height);
  CHECK(r.data == m.data);
  std::filesystem::remove(path);
}
