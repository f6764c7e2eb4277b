#include "arthoi/stage1.hpp"

#include <random>

#include "doctest.h"

#include "arthoi/optimize.hpp"
#include "arthoi/simulate.hpp"

using namespace arthoi;

namespace {

std::mt19937_64 rng(41);

Vec3 rand_vec(double s) {
  std::uniform_real_distribution<double> d(-s, s);
  return Vec3(d(rng), d(rng), d(rng));
}

PinholeCamera plain_camera(int size = 64, double f = 60.0) {
  PinholeCamera cam;
  cam.fx = cam.fy = f;
  cam.cx = cam.cy = size / 2.0;
  cam.width = cam.height = size;
  cam.world_to_camera = RigidTransform::identity();
  return cam;
}

std::vector<Splat> random_weighted_scene(int n_dyn, int n_static) {
  std::vector<Splat> splats;
  std::uniform_real_distribution<double> dx(-0.25, 0.25);
  std::uniform_real_distribution<double> dz(0.9, 1.6);
  for (int i = 0; i < n_dyn + n_static; ++i) {
    Splat s;
    s.mean = Vec3(dx(rng), dx(rng), dz(rng));
    s.radius = 0.04;
    s.opacity = 0.85;
    s.part_weight_dynamic = i < n_dyn ? 1.0 : 0.0;
    splats.push_back(s);
  }
  return splats;
}

Vec6 rand_xi(double rot, double trans) {
  Vec6 xi;
  xi << rand_vec(rot), rand_vec(trans);
  return xi;
}

// Central finite differences of a loss over the 6 chart coordinates.
double fd_check_xi(const std::function<double(const Vec6&)>& f, const Vec6& xi,
                   const Vec6& analytic, double h = 1e-5) {
  double max_rel = 0.0;
  for (int k = 0; k < 6; ++k) {
    Vec6 plus = xi, minus = xi;
    plus[k] += h;
    minus[k] -= h;
    const double numeric = (f(plus) - f(minus)) / (2.0 * h);
    const double denom =
        std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::abs(numeric - analytic[k]) / denom);
  }
  return max_rel;
}

}  // namespace

TEST_CASE("deform_object blend") {
  std::vector<Splat> splats(2);
  splats[0].mean = Vec3(1, 0, 0);
  splats[0].part_weight_dynamic = 1.0;
  splats[1].mean = Vec3(0, 1, 0);
  splats[1].part_weight_dynamic = 0.0;

  SUBCASE("identity leaves everything") {
    const auto posed = deform_object(splats, RigidTransform::identity());
    CHECK((posed[0].mean - splats[0].mean).norm() < 1e-15);
    CHECK((posed[1].mean - splats[1].mean).norm() < 1e-15);
  }
  SUBCASE("static splats ignore the transform") {
    const RigidTransform t(Rotation::from_axis_angle(Vec3(0, 0, 1), 1.0),
                           Vec3(5, 5, 5));
    const auto posed = deform_object(splats, t);
    CHECK((posed[1].mean - splats[1].mean).norm() < 1e-15);
  }
  SUBCASE("dynamic splat translated") {
    const RigidTransform t(Rotation::identity(), Vec3(0, 0, 0.5));
    const auto posed = deform_object(splats, t);
    CHECK((posed[0].mean - Vec3(1, 0, 0.5)).norm() < 1e-15);
  }
}

TEST_CASE("silhouette loss values") {
  const PinholeCamera cam = plain_camera();
  SUBCASE("empty splats, empty mask: zero") {
    const Mask mask(cam.width, cam.height, 0);
    const IncrementFrame fr(RigidTransform::identity(), Vec6::Zero());
    const LossValueGrad l = loss_silhouette({}, fr, cam, mask, 1.0,
                                            RenderConfig());
    CHECK(l.value == 0.0);
    CHECK(l.grad.norm() == 0.0);
  }
  SUBCASE("empty splats vs m foreground pixels: beta * m / (W*H)") {
    Mask mask(cam.width, cam.height, 0);
    int m = 0;
    for (int y = 10; y < 20; ++y) {
      for (int x = 5; x < 25; ++x) {
        mask.at(x, y) = 1;
        ++m;
      }
    }
    const IncrementFrame fr(RigidTransform::identity(), Vec6::Zero());
    const double beta = 2.5;
    const LossValueGrad l =
        loss_silhouette({}, fr, cam, mask, beta, RenderConfig());
    CHECK(l.value ==
          doctest::Approx(beta * m / double(cam.width * cam.height))
              .epsilon(1e-12));
  }
}

TEST_CASE("silhouette gradient matches finite differences over the chart") {
  const PinholeCamera cam = plain_camera();
  const RenderConfig rc;
  for (int trial = 0; trial < 3; ++trial) {
    const auto splats = random_weighted_scene(6, 5);
    Mask mask(cam.width, cam.height, 0);
    for (int y = 20; y < 44; ++y)
      for (int x = 16; x < 48; ++x) mask.at(x, y) = 1;
    const RigidTransform anchor(
        Rotation::from_axis_angle(Vec3(0, 0, 1), 0.05 * trial),
        Vec3(0.01, 0, 0));
    const Vec6 xi = rand_xi(0.02, 0.01);
    const IncrementFrame fr(anchor, xi);
    const LossValueGrad l = loss_silhouette(splats, fr, cam, mask, 1.3, rc);
    const auto f = [&](const Vec6& x) {
      return loss_silhouette(splats, IncrementFrame(anchor, x), cam, mask,
                             1.3, rc)
          .value;
    };
    CHECK(fd_check_xi(f, xi, l.grad, 1e-5) < 1e-3);
  }
}

TEST_CASE("articulation loss") {
  std::vector<Splat> splats(2);
  splats[0].mean = Vec3(0.0, 0.0, 1.0);
  splats[0].part_weight_dynamic = 1.0;
  splats[1].mean = Vec3(0.03, 0.0, 1.0);
  BindingSet bindings;
  bindings.pairs.push_back({0, 1, 0.03});

  SUBCASE("identity transform: zero") {
    const IncrementFrame fr(RigidTransform::identity(), Vec6::Zero());
    CHECK(loss_articulation(splats, bindings, fr).value ==
          doctest::Approx(0.0));
  }
  SUBCASE("stretched pair: squared deviation") {
    Vec6 xi = Vec6::Zero();
    xi[3] = -0.02;  // dynamic moves to distance 0.05
    const IncrementFrame fr(RigidTransform::identity(), xi);
    CHECK(loss_articulation(splats, bindings, fr).value ==
          doctest::Approx(4e-4).epsilon(1e-9));
  }
  SUBCASE("gradient matches finite differences") {
    for (int trial = 0; trial < 5; ++trial) {
      const auto scene = random_weighted_scene(8, 8);
      BindingSet bs;
      for (int i = 0; i < 6; ++i) {
        const int d = i;
        const int s = 8 + i;
        bs.pairs.push_back(
            {d, s, (scene[size_t(d)].mean - scene[size_t(s)].mean).norm() *
                       0.9});
      }
      const RigidTransform anchor(
          Rotation::from_axis_angle(Vec3(1, 1, 0), 0.1), Vec3(0.02, 0, 0.01));
      const Vec6 xi = rand_xi(0.05, 0.02);
      const IncrementFrame fr(anchor, xi);
      const LossValueGrad l = loss_articulation(scene, bs, fr);
      const auto f = [&](const Vec6& x) {
        return loss_articulation(scene, bs, IncrementFrame(anchor, x)).value;
      };
      CHECK(fd_check_xi(f, xi, l.grad, 1e-5) < 1e-3);
    }
  }
  SUBCASE("invariant when the whole scene moves rigidly") {
    // Move static splats by G in the scene and compose G into the dynamic
    // transform: all pairwise distances are preserved exactly.
    const auto scene = random_weighted_scene(6, 6);
    BindingSet bs;
    for (int i = 0; i < 5; ++i) {
      bs.pairs.push_back(
          {i, 6 + i,
           (scene[size_t(i)].mean - scene[size_t(6 + i)].mean).norm()});
    }
    for (int trial = 0; trial < 200; ++trial) {
      const RigidTransform t(
          Rotation::from_axis_angle(rand_vec(1.0) + Vec3(0.1, 0, 0), 0.7),
          rand_vec(0.3));
      const RigidTransform g(
          Rotation::from_axis_angle(rand_vec(1.0) + Vec3(0, 0.1, 0), 1.1),
          rand_vec(2.0));
      const double base =
          loss_articulation(scene, bs, IncrementFrame(t, Vec6::Zero())).value;
      auto moved = scene;
      for (Splat& s : moved) {
        if (s.part_weight_dynamic == 0.0) s.mean = g.apply(s.mean);
      }
      const double shifted =
          loss_articulation(moved, bs,
                            IncrementFrame(g.compose(t), Vec6::Zero()))
              .value;
      CHECK(shifted == doctest::Approx(base).epsilon(1e-9));
    }
  }
}

TEST_CASE("tracking loss") {
  const PinholeCamera cam = plain_camera();
  std::vector<Splat> splats(1);
  splats[0].mean = Vec3(0.05, -0.02, 1.2);
  splats[0].part_weight_dynamic = 1.0;
  InfluenceTable table(1);
  table[0] = {{0, 1.0}};

  SUBCASE("exact reprojection at the true transform") {
    const RigidTransform truth(
        Rotation::from_axis_angle(Vec3(0, 0, 1), 0.3), Vec3(0.05, 0.02, 0));
    const ProjectedPoint target = project(cam, truth.apply(splats[0].mean));
    TrackTargets targets = {target.pixel};
    const IncrementFrame fr(truth, Vec6::Zero());
    CHECK(loss_tracking(splats, table, targets, fr, cam).value < 1e-10);
  }
  SUBCASE("pixel offset (3,4) gives 25") {
    const ProjectedPoint p = project(cam, splats[0].mean);
    TrackTargets targets = {p.pixel + Vec2(3, 4)};
    const IncrementFrame fr(RigidTransform::identity(), Vec6::Zero());
    CHECK(loss_tracking(splats, table, targets, fr, cam).value ==
          doctest::Approx(25.0).epsilon(1e-9));
  }
  SUBCASE("gradient matches finite differences") {
    for (int trial = 0; trial < 5; ++trial) {
      const auto scene = random_weighted_scene(10, 0);
      InfluenceTable infl(4);
      TrackTargets targets(4);
      std::uniform_real_distribution<double> dpx(-30, 30);
      for (int i = 0; i < 4; ++i) {
        infl[size_t(i)] = {{i, 0.5}, {i + 4, 0.3}, {i + 5, 0.2}};
        targets[size_t(i)] = Vec2(32 + dpx(rng), 32 + dpx(rng));
      }
      const RigidTransform anchor(
          Rotation::from_axis_angle(Vec3(0, 1, 0), 0.07), Vec3(0, 0.01, 0));
      const Vec6 xi = rand_xi(0.03, 0.02);
      const IncrementFrame fr(anchor, xi);
      const LossValueGrad l = loss_tracking(scene, infl, targets, fr, cam);
      const auto f = [&](const Vec6& x) {
        return loss_tracking(scene, infl, targets, IncrementFrame(anchor, x),
                             cam)
            .value;
      };
      CHECK(fd_check_xi(f, xi, l.grad, 1e-5) < 1e-3);
    }
  }
}

TEST_CASE("smoothness loss over the transform window") {
  SUBCASE("constant transform: zero") {
    const RigidTransform t(Rotation::from_axis_angle(Vec3(0, 0, 1), 0.4),
                           Vec3(0.1, 0.2, 0.3));
    const IncrementFrame fr(t, Vec6::Zero());
    CHECK(loss_smoothness_se3(t, t, fr).value < 1e-20);
  }
  SUBCASE("uniform screw motion: zero") {
    const RigidTransform s(Rotation::from_axis_angle(Vec3(0.2, 1, 0), 0.05),
                           Vec3(0.01, -0.02, 0.005));
    const RigidTransform t0 = s;
    const RigidTransform t1 = s.compose(s);
    const RigidTransform t2 = s.compose(s).compose(s);
    const IncrementFrame fr(t2, Vec6::Zero());
    CHECK(loss_smoothness_se3(t0, t1, fr).value < 1e-16);
  }
  SUBCASE("0.1 then 0.3 rad about one axis: (0.2)^2") {
    const Vec3 axis(0, 0, 1);
    const RigidTransform t0 = RigidTransform::identity();
    const RigidTransform t1(Rotation::from_axis_angle(axis, 0.1),
                            Vec3::Zero());
    const RigidTransform t2(Rotation::from_axis_angle(axis, 0.4),
                            Vec3::Zero());
    const IncrementFrame fr(t2, Vec6::Zero());
    CHECK(loss_smoothness_se3(t0, t1, fr).value ==
          doctest::Approx(0.04).epsilon(1e-9));
  }
  SUBCASE("first frame contributes nothing") {
    const IncrementFrame fr(RigidTransform::identity(), Vec6::Zero());
    CHECK(loss_smoothness_se3(std::nullopt, std::nullopt, fr).value == 0.0);
  }
  SUBCASE("gradient matches finite differences") {
    for (int trial = 0; trial < 8; ++trial) {
      const RigidTransform t0(Rotation::from_axis_angle(rand_vec(1.0), 0.3),
                              rand_vec(0.2));
      const RigidTransform t1(Rotation::from_axis_angle(rand_vec(1.0), 0.5),
                              rand_vec(0.2));
      const RigidTransform anchor(
          Rotation::from_axis_angle(rand_vec(1.0), 0.6), rand_vec(0.2));
      const Vec6 xi = rand_xi(0.05, 0.03);
      const IncrementFrame fr(anchor, xi);
      const LossValueGrad l = loss_smoothness_se3(t0, t1, fr);
      const auto f = [&](const Vec6& x) {
        return loss_smoothness_se3(t0, t1, IncrementFrame(anchor, x)).value;
      };
      CHECK(fd_check_xi(f, xi, l.grad, 1e-5) < 1e-3);
      // First-difference variant at the second frame.
      const LossValueGrad l1 = loss_smoothness_se3(std::nullopt, t1, fr);
      const auto f1 = [&](const Vec6& x) {
        return loss_smoothness_se3(std::nullopt, t1,
                                   IncrementFrame(anchor, x))
            .value;
      };
      CHECK(fd_check_xi(f1, xi, l1.grad, 1e-5) < 1e-3);
    }
  }
}

TEST_CASE("warm-start extrapolation is exact for uniform screws") {
  const RigidTransform s(Rotation::from_axis_angle(Vec3(0.3, 0.1, 1), 0.04),
                         Vec3(0.003, -0.001, 0.002));
  const RigidTransform t1 = s;
  const RigidTransform t2 = s.compose(s);
  const RigidTransform step =
      transform_exp(transform_log(t1.inverse().compose(t2)));
  const RigidTransform warm = t2.compose(step);
  const RigidTransform expected = s.compose(s).compose(s);
  CHECK(geodesic_angle_deg(warm.rotation, expected.rotation) < 1e-10);
  CHECK((warm.translation - expected.translation).norm() < 1e-12);
}

TEST_CASE("run_stage1 on an all-static scene keeps the identity") {
  ObservationBundle bundle;
  GroundTruth gt;
  SceneDescriptor d;
  d.template_name = "drawer";
  d.frames = 8;
  d.travel = 0.0;
  d.splat_density = 150.0;
  d.seed = 61;
  SimulationParams sim;
  sim.image_width = sim.image_height = 96;
  sim.fx = sim.fy = 75.0;
  sim.n_track_points = 60;
  sim.sigma_track = 0.0;
  simulate_bundle(d, sim, &bundle, &gt);

  SegmentationResult seg;
  seg.motion.t_src = 0;
  seg.motion.t_tgt = d.frames - 1;
  seg.motion.label.assign(size_t(bundle.tracks.n_points),
                          MotionLabel::Static);
  seg.motion.magnitude.assign(size_t(bundle.tracks.n_points), 0.0);
  seg.assignment.dynamic.assign(bundle.splats_canonical.size(), 0);
  seg.assignment.s_dyn.assign(bundle.splats_canonical.size(), 0.0);
  seg.assignment.s_static.assign(bundle.splats_canonical.size(), 1.0);
  seg.bindings.empty_warning = true;

  Stage1Config cfg;
  cfg.iters_per_frame = 30;
  const ArticulationTrajectory traj = run_stage1(bundle, seg, cfg);
  for (const RigidTransform& t : traj.transforms) {
    CHECK(geodesic_angle_deg(t.rotation, Rotation::identity()) < 0.1);
    CHECK(t.translation.norm() < 1e-3);
  }
}

TEST_CASE("run_stage1 recovers a small noise-free hinge motion") {
  ObservationBundle bundle;
  GroundTruth gt;
  SceneDescriptor d;
  d.template_name = "hinged-door";
  d.frames = 16;
  d.travel = 20.0 * M_PI / 180.0;
  d.splat_density = 300.0;
  d.seed = 71;
  SimulationParams sim;
  sim.image_width = sim.image_height = 128;
  sim.fx = sim.fy = 100.0;
  sim.n_track_points = 250;
  sim.sigma_track = 0.0;
  sim.sigma_pose = 0.0;
  sim.sigma_root = 0.0;
  simulate_bundle(d, sim, &bundle, &gt);

  SegmentationConfig scfg;
  const SegmentationResult seg = run_segmentation(bundle, scfg);
  Stage1Config cfg;
  const ArticulationTrajectory traj = run_stage1(bundle, seg, cfg);

  double max_err = 0.0;
  for (int t = 0; t < d.frames; ++t) {
    max_err = std::max(max_err,
                       geodesic_angle_deg(traj.transforms[size_t(t)].rotation,
                                          gt.transforms[size_t(t)].rotation));
  }
  CHECK(max_err < 1.0);

  // Best-kept losses must be finite and recorded.
  for (int t = 1; t < d.frames; ++t) {
    CHECK(std::isfinite(traj.losses[size_t(t)].total));
    CHECK(traj.losses[size_t(t)].iterations > 0);
  }
}
