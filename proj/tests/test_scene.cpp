#include "arthoi/scene.hpp"

#include <set>

#include "doctest.h"

#include "arthoi/simulate.hpp"

using namespace arthoi;

namespace {

SceneDescriptor small_door(int frames = 20) {
  SceneDescriptor d;
  d.template_name = "hinged-door";
  d.frames = frames;
  d.splat_density = 200.0;
  d.seed = 99;
  return d;
}

// Distance from a point to the (pivot, axis) line.
double axis_distance(const Vec3& p, const Vec3& pivot, const Vec3& axis) {
  const Vec3 rel = p - pivot;
  return (rel - rel.dot(axis) * axis).norm();
}

}  // namespace

TEST_CASE("panel splat count tracks area times density") {
  SceneDescriptor d;
  d.template_name = "hinged-door";
  d.panel_width = 1.0;
  d.panel_height = 2.0;
  d.splat_density = 100.0;
  d.border = 0.12;
  const ArticulatedScene scene = build_scene(d);
  const double n = double(scene.dynamic_splats_canonical.size());
  CHECK(n > 0.9 * 200.0);
  CHECK(n < 1.1 * 200.0);
}

TEST_CASE("drawer template uses a prismatic joint") {
  SceneDescriptor d = small_door();
  d.template_name = "drawer";
  d.travel = 0.25;
  const ArticulatedScene scene = build_scene(d);
  CHECK(scene.joint.kind == JointKind::Prismatic);
  CHECK(std::abs(scene.joint.axis.norm() - 1.0) < 1e-9);
}

TEST_CASE("same seed gives a bit-identical scene") {
  const ArticulatedScene a = build_scene(small_door());
  const ArticulatedScene b = build_scene(small_door());
  REQUIRE(a.static_splats.size() == b.static_splats.size());
  REQUIRE(a.dynamic_splats_canonical.size() ==
          b.dynamic_splats_canonical.size());
  for (size_t i = 0; i < a.static_splats.size(); ++i) {
    CHECK(a.static_splats[i].mean == b.static_splats[i].mean);
  }
  for (size_t i = 0; i < a.dynamic_splats_canonical.size(); ++i) {
    CHECK(a.dynamic_splats_canonical[i].mean ==
          b.dynamic_splats_canonical[i].mean);
  }
}

TEST_CASE("invalid scene descriptors are rejected") {
  SceneDescriptor d = small_door();
  d.panel_width = -1.0;
  CHECK_THROWS(build_scene(d));
  d = small_door();
  d.template_name = "teapot";
  CHECK_THROWS(build_scene(d));
  d = small_door();
  d.splat_density = 0.0;
  CHECK_THROWS(build_scene(d));
}

TEST_CASE("gt_transform closed forms") {
  SceneDescriptor d = small_door();
  d.travel = 30.0 * M_PI / 180.0;
  d.open_start_frac = 0.0;
  d.open_end_frac = 1.0;
  const ArticulatedScene scene = build_scene(d);

  SUBCASE("zero angle is the identity") {
    const RigidTransform t0 = gt_transform(scene, 0);
    CHECK(geodesic_angle_deg(t0.rotation, Rotation::identity()) < 1e-9);
    CHECK(t0.translation.norm() < 1e-12);
  }
  SUBCASE("final angle matches and the pivot stays fixed") {
    const RigidTransform t = gt_transform(scene, scene.frames() - 1);
    CHECK(geodesic_angle_deg(t.rotation, Rotation::identity()) ==
          doctest::Approx(30.0).epsilon(1e-9));
    CHECK((t.apply(scene.joint.pivot) - scene.joint.pivot).norm() < 1e-12);
  }
  SUBCASE("prismatic translation") {
    SceneDescriptor pd = small_door();
    pd.template_name = "drawer";
    pd.travel = 0.2;
    pd.open_start_frac = 0.0;
    pd.open_end_frac = 1.0;
    const ArticulatedScene ps = build_scene(pd);
    const RigidTransform t = gt_transform(ps, ps.frames() - 1);
    CHECK(geodesic_angle_deg(t.rotation, Rotation::identity()) < 1e-9);
    CHECK((t.translation - 0.2 * ps.joint.axis).norm() < 1e-12);
  }
  SUBCASE("out-of-range frame throws") {
    CHECK_THROWS(gt_transform(scene, scene.frames()));
  }
}

TEST_CASE("hinge motion conserves distance to the axis line") {
  SceneDescriptor d = small_door();
  d.travel = 45.0 * M_PI / 180.0;
  const ArticulatedScene scene = build_scene(d);
  for (int t = 0; t < scene.frames(); t += 5) {
    const RigidTransform T = gt_transform(scene, t);
    for (const Splat& s : scene.dynamic_splats_canonical) {
      const double before =
          axis_distance(s.mean, scene.joint.pivot, scene.joint.axis);
      const double after =
          axis_distance(T.apply(s.mean), scene.joint.pivot, scene.joint.axis);
      CHECK(std::abs(before - after) < 1e-9);
    }
  }
}

TEST_CASE("splats near the pivot move at most angle times radius") {
  SceneDescriptor d = small_door();
  d.travel = 45.0 * M_PI / 180.0;
  const ArticulatedScene scene = build_scene(d);
  const double r = 0.15;
  for (int t = 0; t < scene.frames(); t += 3) {
    const RigidTransform T = gt_transform(scene, t);
    const double angle = scene.angle_trajectory[size_t(t)];
    for (const Splat& s : scene.dynamic_splats_canonical) {
      const double rho =
          axis_distance(s.mean, scene.joint.pivot, scene.joint.axis);
      if (rho > r) continue;
      const double moved = (T.apply(s.mean) - s.mean).norm();
      CHECK(moved <= angle * r + 1e-9);
    }
  }
}
