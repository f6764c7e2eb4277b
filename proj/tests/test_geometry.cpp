#include "arthoi/geometry.hpp"

#include <cmath>
#include <random>

#include "doctest.h"

using namespace arthoi;

namespace {

std::mt19937_64 rng(42);

Vec3 random_vec(double scale) {
  std::uniform_real_distribution<double> d(-scale, scale);
  return Vec3(d(rng), d(rng), d(rng));
}

Rotation random_rotation() {
  Vec3 v = random_vec(1.0);
  if (v.norm() < 1e-6) v = Vec3(1, 0, 0);
  std::uniform_real_distribution<double> a(0.0, M_PI - 1e-3);
  return Rotation::from_axis_angle(v, a(rng));
}

}  // namespace

TEST_CASE("so3_exp zero maps to identity") {
  const Rotation r = so3_exp(Vec3::Zero());
  CHECK(r.w() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((r * Vec3(1, 2, 3) - Vec3(1, 2, 3)).norm() < 1e-12);
}

TEST_CASE("so3_exp quarter turn about z maps x to y") {
  // Rodrigues by hand: cos(pi/2) x + sin(pi/2) (z x x) = (0,1,0).
  const Rotation r = so3_exp(Vec3(0, 0, M_PI / 2));
  CHECK((r * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() < 1e-9);
}

TEST_CASE("so3_exp small angle is identity-like and finite") {
  const Rotation r = so3_exp(Vec3(0, 0, 2e-9));
  const Vec3 p = r * Vec3(1, 0, 0);
  CHECK(std::isfinite(p.x()));
  CHECK((p - Vec3(1, 0, 0)).norm() < 1e-8);
  CHECK(std::abs(r.quat().norm() - 1.0) < 1e-9);
}

TEST_CASE("so3_log of identity is zero") {
  CHECK(so3_log(Rotation::identity()).norm() < 1e-12);
}

TEST_CASE("so3_log round trip") {
  const Vec3 v(0.3, 0, 0);
  CHECK((so3_log(so3_exp(v)) - v).norm() < 1e-8);
}

TEST_CASE("so3_log at pi picks a deterministic axis") {
  const Rotation r = Rotation::from_axis_angle(Vec3(0, 0, 1), M_PI);
  const Vec3 v = so3_log(r);
  CHECK(v.norm() == doctest::Approx(M_PI).epsilon(1e-9));
  CHECK(std::abs(std::abs(v.z()) - M_PI) < 1e-9);
  // First nonzero component positive.
  CHECK(v.z() > 0.0);

  const Rotation rx = Rotation::from_axis_angle(Vec3(-1, 0, 0), M_PI);
  const Vec3 vx = so3_log(rx);
  CHECK(vx.x() > 0.0);
}

TEST_CASE("so3 log-exp round trip property") {
  for (int i = 0; i < 300; ++i) {
    Vec3 axis = random_vec(1.0);
    if (axis.norm() < 1e-9) axis = Vec3(0, 0, 1);
    std::uniform_real_distribution<double> a(0.0, M_PI - 1e-6);
    const Vec3 v = axis.normalized() * a(rng);
    CHECK((so3_log(so3_exp(v)) - v).norm() < 1e-8);
  }
}

TEST_CASE("right Jacobian first-order identity") {
  for (int i = 0; i < 50; ++i) {
    const Vec3 w = random_vec(1.5);
    const Vec3 d = random_vec(1e-6);
    const Mat3 lhs = so3_exp(w + d).matrix();
    const Mat3 rhs =
        so3_exp(w).matrix() * so3_exp(so3_right_jacobian(w) * d).matrix();
    CHECK((lhs - rhs).norm() < 1e-9);
    CHECK((so3_right_jacobian_inv(w) * so3_right_jacobian(w) -
           Mat3::Identity())
              .norm() < 1e-9);
  }
}

TEST_CASE("se3_apply examples") {
  CHECK((se3_apply(RigidTransform::identity(), Vec3(1, 2, 3)) - Vec3(1, 2, 3))
            .norm() < 1e-15);

  const RigidTransform shift(Rotation::identity(), Vec3(0.1, 0, 0));
  CHECK((se3_apply(shift, Vec3::Zero()) - Vec3(0.1, 0, 0)).norm() < 1e-15);

  // 90 degrees about z then translate (1,0,0): (1,0,0) -> (0,1,0) -> (1,1,0).
  const RigidTransform t(Rotation::from_axis_angle(Vec3(0, 0, 1), M_PI / 2),
                         Vec3(1, 0, 0));
  CHECK((se3_apply(t, Vec3(1, 0, 0)) - Vec3(1, 1, 0)).norm() < 1e-12);
}

TEST_CASE("compose-inverse identity on probe points") {
  for (int i = 0; i < 100; ++i) {
    const RigidTransform t(random_rotation(), random_vec(2.0));
    const RigidTransform id = t.compose(t.inverse());
    for (int k = 0; k < 3; ++k) {
      const Vec3 p = random_vec(3.0);
      CHECK((id.apply(p) - p).norm() < 1e-8);
      CHECK((t.inverse().apply(t.apply(p)) - p).norm() < 1e-8);
    }
  }
}

TEST_CASE("transform_exp/log invert each other") {
  for (int i = 0; i < 100; ++i) {
    Vec6 xi;
    xi << random_vec(1.5), random_vec(2.0);
    CHECK((transform_log(transform_exp(xi)) - xi).norm() < 1e-9);
  }
}

TEST_CASE("projection examples") {
  PinholeCamera cam;
  cam.fx = cam.fy = 100.0;
  cam.cx = cam.cy = 50.0;
  cam.width = cam.height = 100;
  cam.world_to_camera = RigidTransform::identity();

  SUBCASE("optical axis hits the principal point") {
    const ProjectedPoint p = project(cam, Vec3(0, 0, 2));
    CHECK(p.valid);
    CHECK(p.pixel.x() == doctest::Approx(50.0));
    CHECK(p.pixel.y() == doctest::Approx(50.0));
    CHECK(p.depth == doctest::Approx(2.0));
  }
  SUBCASE("pinhole formula") {
    const ProjectedPoint p = project(cam, Vec3(0.5, 0, 1));
    CHECK(p.valid);
    CHECK(p.pixel.x() == doctest::Approx(100.0));
    CHECK(p.pixel.y() == doctest::Approx(50.0));
    CHECK(p.depth == doctest::Approx(1.0));
  }
  SUBCASE("behind camera flagged, never NaN") {
    const ProjectedPoint p = project(cam, Vec3(0, 0, -1));
    CHECK_FALSE(p.valid);
    CHECK(std::isfinite(p.pixel.x()));
  }
  SUBCASE("doubling fx doubles the x offset from cx") {
    const Vec3 q(0.3, -0.2, 1.7);
    const ProjectedPoint p1 = project(cam, q);
    PinholeCamera cam2 = cam;
    cam2.fx *= 2.0;
    const ProjectedPoint p2 = project(cam2, q);
    CHECK(p2.pixel.x() - cam.cx ==
          doctest::Approx(2.0 * (p1.pixel.x() - cam.cx)).epsilon(1e-12));
  }
}

TEST_CASE("geodesic angle examples") {
  const Rotation r = random_rotation();
  CHECK(geodesic_angle_deg(r, r) == doctest::Approx(0.0).epsilon(1e-9));

  const Rotation r30 = Rotation::from_axis_angle(Vec3(0, 0, 1), M_PI / 6);
  CHECK(geodesic_angle_deg(Rotation::identity(), r30) ==
        doctest::Approx(30.0).epsilon(1e-9));

  const Rotation flip = Rotation::from_axis_angle(Vec3(1, 0, 0), M_PI);
  CHECK(geodesic_angle_deg(r, r * flip) ==
        doctest::Approx(180.0).epsilon(1e-9));
}

TEST_CASE("geodesic angle symmetry and triangle inequality") {
  for (int i = 0; i < 300; ++i) {
    const Rotation a = random_rotation();
    const Rotation b = random_rotation();
    const Rotation c = random_rotation();
    const double ab = geodesic_angle_deg(a, b);
    const double ba = geodesic_angle_deg(b, a);
    CHECK(std::abs(ab - ba) < 1e-9);
    CHECK(ab <= geodesic_angle_deg(a, c) + geodesic_angle_deg(c, b) + 1e-6);
    CHECK(ab >= 0.0);
    CHECK(ab <= 180.0 + 1e-12);
  }
}

TEST_CASE("quaternion norm maintained through composition chains") {
  Rotation r = Rotation::identity();
  for (int i = 0; i < 1000; ++i) {
    r = r * random_rotation();
  }
  CHECK(std::abs(r.quat().norm() - 1.0) < 1e-9);
}

TEST_CASE("look_at camera projects the target to the principal point") {
  const PinholeCamera cam = PinholeCamera::look_at(
      200, 200, 128, 128, 256, 256, Vec3(0.3, -1.5, 0.8), Vec3(0, 1.4, 0.75));
  const ProjectedPoint p = project(cam, Vec3(0, 1.4, 0.75));
  CHECK(p.valid);
  CHECK(p.pixel.x() == doctest::Approx(128.0).epsilon(1e-9));
  CHECK(p.pixel.y() == doctest::Approx(128.0).epsilon(1e-9));
}
