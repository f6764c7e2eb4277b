#include "arthoi/metrics.hpp"

#include <random>

#include "doctest.h"

using namespace arthoi;

namespace {

std::vector<RigidTransform> rotations_about_z(const std::vector<double>& deg) {
  std::vector<RigidTransform> out;
  for (double d : deg) {
    out.emplace_back(Rotation::from_axis_angle(Vec3(0, 0, 1), d * M_PI / 180),
                     Vec3::Zero());
  }
  return out;
}

BodyParams standing(int frames) {
  BodyParams p;
  p.resize(frames);
  for (int t = 0; t < frames; ++t) {
    p.root_translation[size_t(t)] = Vec3(0, 0, 0.94);
  }
  return p;
}

}  // namespace

TEST_CASE("rotation error statistics") {
  SUBCASE("identical trajectories: all zeros") {
    const auto traj = rotations_about_z({0, 5, 10, 20});
    const RotationStats s = rotation_errors(traj, traj);
    CHECK(s.mean == doctest::Approx(0.0));
    CHECK(s.max == doctest::Approx(0.0));
    CHECK(s.stddev == doctest::Approx(0.0));
  }
  SUBCASE("constant 10 degree offset") {
    const auto gt = rotations_about_z({0, 5, 10});
    const auto est = rotations_about_z({10, 15, 20});
    const RotationStats s = rotation_errors(est, gt);
    CHECK(s.mean == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(s.max == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(s.min == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(s.median == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(s.stddev == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("errors {0, 10}") {
    const auto gt = rotations_about_z({0, 0});
    const auto est = rotations_about_z({0, 10});
    const RotationStats s = rotation_errors(est, gt);
    CHECK(s.mean == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(s.max == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(s.min == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s.median == doctest::Approx(5.0).epsilon(1e-9));
  }
  SUBCASE("symmetric under swapping est and gt") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> d(0, 40);
    const auto a = rotations_about_z({d(rng), d(rng), d(rng)});
    const auto b = rotations_about_z({d(rng), d(rng), d(rng)});
    const RotationStats ab = rotation_errors(a, b);
    const RotationStats ba = rotation_errors(b, a);
    CHECK(ab.mean == doctest::Approx(ba.mean).epsilon(1e-12));
    CHECK(ab.median == doctest::Approx(ba.median).epsilon(1e-12));
  }
  SUBCASE("length mismatch throws") {
    CHECK_THROWS(rotation_errors(rotations_about_z({0}),
                                 rotations_about_z({0, 1})));
  }
}

TEST_CASE("contact percentage") {
  BodyParams p = standing(4);
  const Vec3 wrist = fk(p, 0).joint_pos[kRWrist];
  SUBCASE("object a meter away: 0%") {
    std::vector<std::vector<Vec3>> pts(4, {wrist + Vec3(0, 1.5, 0)});
    CHECK(contact_percentage(p, pts, 0.02) == doctest::Approx(0.0));
  }
  SUBCASE("object pinned to the wrist: 100%") {
    std::vector<std::vector<Vec3>> pts(4, {wrist});
    CHECK(contact_percentage(p, pts, 0.02) == doctest::Approx(100.0));
  }
  SUBCASE("contact on half the frames: 50%") {
    std::vector<std::vector<Vec3>> pts(4);
    pts[0] = {wrist};
    pts[1] = {wrist + Vec3(0, 1, 0)};
    pts[2] = {wrist + Vec3(0.01, 0, 0)};
    pts[3] = {wrist + Vec3(0, 1, 0)};
    CHECK(contact_percentage(p, pts, 0.02) == doctest::Approx(50.0));
  }
  SUBCASE("monotone in the threshold") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> d(-0.1, 0.1);
    std::vector<std::vector<Vec3>> pts(4);
    for (auto& v : pts) {
      for (int i = 0; i < 5; ++i) {
        v.push_back(wrist + Vec3(d(rng), d(rng), d(rng)));
      }
    }
    double prev = 0.0;
    for (double th = 0.005; th <= 0.15; th += 0.005) {
      const double c = contact_percentage(p, pts, th);
      CHECK(c >= prev - 1e-12);
      prev = c;
    }
  }
}

TEST_CASE("penetration percentage") {
  BodyParams p = standing(1);
  const auto& verts = body_surface_vertices();
  const FkFrame f = fk(p, 0);

  SUBCASE("surface plane far in front of the body: 0%") {
    SurfaceSamples surf;
    for (double x = -2; x <= 2; x += 0.1) {
      for (double z = 0; z <= 2; z += 0.1) {
        surf.points.push_back(Vec3(x, 5.0, z));
        surf.normals.push_back(Vec3(0, -1, 0));  // outward toward the body
        surf.dynamic.push_back(0);
      }
    }
    CHECK(penetration_percentage(p, {surf}, 0.001) == doctest::Approx(0.0));
  }
  SUBCASE("one vertex a centimeter behind a plane counts") {
    // Plane passing 1 cm in front of the head-top vertex, normal -z: the
    // vertex sits behind it.
    Vec3 top = f.joint_pos[kPelvis];
    for (const SurfaceVertex& v : verts) {
      top = f.vertex_position(v).z() > top.z() ? f.vertex_position(v) : top;
    }
    SurfaceSamples surf;
    surf.points.push_back(top + Vec3(0, 0, 0.01));
    surf.normals.push_back(Vec3(0, 0, 1));
    surf.dynamic.push_back(0);
    // Exactly the vertices whose nearest sample puts them below the plane.
    const double pct = penetration_percentage(p, {surf}, 0.001);
    CHECK(pct > 0.0);
  }
  SUBCASE("vertex exactly on the surface does not count") {
    const Vec3 v0 = f.vertex_position(verts[0]);
    SurfaceSamples surf;
    surf.points.push_back(v0);
    surf.normals.push_back(Vec3(0, 0, 1));
    surf.dynamic.push_back(0);
    // All other vertices are on either side; restrict eps so that only
    // strictly negative signed distances count.
    const double pct_strict = penetration_percentage(p, {surf}, 1e9);
    CHECK(pct_strict == doctest::Approx(0.0));
  }
  SUBCASE("monotone non-increasing in eps") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> d(-0.5, 0.5);
    SurfaceSamples surf;
    for (int i = 0; i < 60; ++i) {
      surf.points.push_back(Vec3(d(rng), d(rng), 0.9 + d(rng)));
      surf.normals.push_back(Vec3(d(rng), d(rng), d(rng)).normalized());
      surf.dynamic.push_back(0);
    }
    double prev = 1e9;
    for (double eps = 0.0; eps <= 0.2; eps += 0.01) {
      const double pct = penetration_percentage(p, {surf}, eps);
      CHECK(pct <= prev + 1e-12);
      prev = pct;
    }
  }
}

TEST_CASE("foot sliding score") {
  SUBCASE("stationary feet on the ground: zero") {
    CHECK(foot_sliding(standing(6), 0.0, 0.02) == doctest::Approx(0.0));
  }
  SUBCASE("steady 0.01 m/frame slide scores 0.01") {
    BodyParams p = standing(6);
    for (int t = 0; t < 6; ++t) {
      p.root_translation[size_t(t)] += Vec3(0.01 * t, 0, 0);
    }
    CHECK(foot_sliding(p, 0.0, 0.02, 0.001) ==
          doctest::Approx(0.01).epsilon(1e-9));
  }
  SUBCASE("airborne feet: zero") {
    BodyParams p = standing(6);
    for (int t = 0; t < 6; ++t) p.root_translation[size_t(t)].z() += 2.0;
    CHECK(foot_sliding(p, 0.0, 0.02) == doctest::Approx(0.0));
  }
  SUBCASE("invariant under a rigid horizontal shift of the sequence") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> d(-0.01, 0.01);
    BodyParams p = standing(8);
    for (int t = 0; t < 8; ++t) {
      p.root_translation[size_t(t)] += Vec3(d(rng), d(rng), 0);
    }
    const double base = foot_sliding(p, 0.0, 0.02);
    for (int t = 0; t < 8; ++t) {
      p.root_translation[size_t(t)] += Vec3(3.7, -1.2, 0);
    }
    CHECK(foot_sliding(p, 0.0, 0.02) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("motion smoothness") {
  SUBCASE("constant-velocity motion: zero") {
    BodyParams p = standing(8);
    for (int t = 0; t < 8; ++t) {
      p.root_translation[size_t(t)] += Vec3(0.05 * t, 0, 0);
    }
    CHECK(motion_smoothness(p, 30.0) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("two speeds with equal counts give their half-gap") {
    // Root moves 1/30 m per frame for two transitions, then 3/30 m for two:
    // all joint speeds are 1 or 3 m/s in equal numbers, std = 1.
    BodyParams p = standing(5);
    double x = 0.0;
    const double steps[4] = {1.0 / 30, 1.0 / 30, 3.0 / 30, 3.0 / 30};
    for (int t = 1; t < 5; ++t) {
      x += steps[t - 1];
      p.root_translation[size_t(t)] = Vec3(x, 0, 0.94);
    }
    CHECK(motion_smoothness(p, 30.0) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("static body: zero") {
    CHECK(motion_smoothness(standing(5), 30.0) == doctest::Approx(0.0));
  }
}

TEST_CASE("posed surface samples follow the dynamic transform") {
  SurfaceSamples canon;
  canon.points = {Vec3(1, 0, 0), Vec3(0, 1, 0)};
  canon.normals = {Vec3(1, 0, 0), Vec3(0, 1, 0)};
  canon.dynamic = {1, 0};
  const RigidTransform t(Rotation::from_axis_angle(Vec3(0, 0, 1), M_PI / 2),
                         Vec3(0, 0, 1));
  const auto posed = pose_surface_samples(canon, {t});
  CHECK((posed[0].points[0] - Vec3(0, 1, 1)).norm() < 1e-12);
  CHECK((posed[0].normals[0] - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK((posed[0].points[1] - Vec3(0, 1, 0)).norm() < 1e-12);  // static stays
}
