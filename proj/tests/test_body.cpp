#include "arthoi/body.hpp"

#include <random>

#include "doctest.h"

using namespace arthoi;

namespace {

BodyParams single_frame_params() {
  BodyParams p;
  p.resize(1);
  return p;
}

}  // namespace

TEST_CASE("canonical T-pose joint positions") {
  BodyParams p = single_frame_params();
  const FkFrame f = fk(p, 0);
  // Cumulative sums of the canonical offsets.
  CHECK((f.joint_pos[kPelvis] - Vec3(0, 0, 0)).norm() < 1e-15);
  CHECK((f.joint_pos[kSpine] - Vec3(0, 0, 0.22)).norm() < 1e-15);
  CHECK((f.joint_pos[kRShoulder] - Vec3(0.20, 0, 0.60)).norm() < 1e-15);
  CHECK((f.joint_pos[kRElbow] - Vec3(0.52, 0, 0.60)).norm() < 1e-15);
  CHECK((f.joint_pos[kRWrist] - Vec3(0.82, 0, 0.60)).norm() < 1e-15);
  CHECK((f.joint_pos[kLWrist] - Vec3(-0.82, 0, 0.60)).norm() < 1e-15);
  CHECK((f.joint_pos[kLAnkle] - Vec3(-0.10, 0, -0.87)).norm() < 1e-12);
  CHECK((f.joint_pos[kRToe] - Vec3(0.10, 0.16, -0.94)).norm() < 1e-12);
}

TEST_CASE("root translation shifts every joint and vertex rigidly") {
  BodyParams p = single_frame_params();
  const FkFrame base = fk(p, 0);
  p.root_translation[0] = Vec3(0, 0, 1);
  const FkFrame moved = fk(p, 0);
  for (int j = 0; j < kNumJoints; ++j) {
    CHECK((moved.joint_pos[size_t(j)] - base.joint_pos[size_t(j)] -
           Vec3(0, 0, 1))
              .norm() < 1e-14);
  }
  for (const SurfaceVertex& v : body_surface_vertices()) {
    CHECK((moved.vertex_position(v) - base.vertex_position(v) - Vec3(0, 0, 1))
              .norm() < 1e-14);
  }
}

TEST_CASE("bent elbow: wrist equals shoulder + upper arm + rotated forearm") {
  BodyParams p = single_frame_params();
  // Bend the right elbow 90 degrees about +z: forearm +x -> +y.
  p.joint_rotvec[0][kRElbow] = Vec3(0, 0, M_PI / 2);
  const FkFrame f = fk(p, 0);
  const Vec3 expected = Vec3(0.52, 0, 0.60) + 0.30 * Vec3(0, 1, 0);
  CHECK((f.joint_pos[kRWrist] - expected).norm() < 1e-12);
}

TEST_CASE("shape scale acts linearly on positions relative to the root") {
  BodyParams p = single_frame_params();
  p.root_translation[0] = Vec3(0.3, -0.1, 0.9);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-0.3, 0.3);
  for (int j = 0; j < kNumJoints; ++j) {
    p.joint_rotvec[0][size_t(j)] = Vec3(d(rng), d(rng), d(rng));
  }
  const FkFrame f1 = fk(p, 0);
  p.shape_scale = 2.0;
  const FkFrame f2 = fk(p, 0);
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec3 r1 = f1.joint_pos[size_t(j)] - p.root_translation[0];
    const Vec3 r2 = f2.joint_pos[size_t(j)] - p.root_translation[0];
    CHECK((r2 - 2.0 * r1).norm() < 1e-12);
  }
}

TEST_CASE("surface vertices carry the expected tags") {
  const auto& verts = body_surface_vertices();
  CHECK(verts.size() > 200);
  int hands = 0, feet = 0;
  for (const SurfaceVertex& v : verts) {
    if (v.tag == VertexTag::Hand) {
      ++hands;
      CHECK((v.joint == kLWrist || v.joint == kRWrist));
    }
    if (v.tag == VertexTag::Foot) {
      ++feet;
      CHECK((v.joint == kLAnkle || v.joint == kLToe || v.joint == kRAnkle ||
             v.joint == kRToe));
    }
  }
  CHECK(hands > 0);
  CHECK(feet > 0);
  CHECK(foot_vertices_of_side(-1).size() + foot_vertices_of_side(1).size() ==
        size_t(feet));
}

TEST_CASE("analytic point gradients match finite differences through fk") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-0.4, 0.4);
  BodyParams p = single_frame_params();
  p.root_translation[0] = Vec3(0.1, 0.2, 0.9);
  for (int j = 0; j < kNumJoints; ++j) {
    p.joint_rotvec[0][size_t(j)] = Vec3(d(rng), d(rng), d(rng));
  }
  const auto& verts = body_surface_vertices();
  const SurfaceVertex& sv = verts[verts.size() / 2];
  const Vec3 probe(0.3, -0.7, 0.4);  // fixed direction for a scalar loss

  // Scalar loss: dot(point, probe). Analytic gradient via the accumulator.
  const FkFrame f = fk(p, 0);
  const Vec3 point = f.vertex_position(sv);
  std::vector<double> grad_pose(kNumJoints * 3, 0.0);
  Vec3 grad_root = Vec3::Zero();
  double grad_scale = 0.0;
  accumulate_point_gradient(f, p, 0, sv.joint, point, probe, grad_pose.data(),
                            &grad_root, &grad_scale);

  const double h = 1e-6;
  auto eval = [&](const BodyParams& q) {
    return fk(q, 0).vertex_position(sv).dot(probe);
  };
  for (int j = 0; j < kNumJoints; ++j) {
    for (int k = 0; k < 3; ++k) {
      BodyParams plus = p, minus = p;
      plus.joint_rotvec[0][size_t(j)][k] += h;
      minus.joint_rotvec[0][size_t(j)][k] -= h;
      const double numeric = (eval(plus) - eval(minus)) / (2 * h);
      CHECK(std::abs(numeric - grad_pose[size_t(3 * j + k)]) < 1e-6);
    }
  }
  for (int k = 0; k < 3; ++k) {
    BodyParams plus = p, minus = p;
    plus.root_translation[0][k] += h;
    minus.root_translation[0][k] -= h;
    const double numeric = (eval(plus) - eval(minus)) / (2 * h);
    CHECK(std::abs(numeric - grad_root[k]) < 1e-6);
  }
  {
    BodyParams plus = p, minus = p;
    plus.shape_scale += h;
    minus.shape_scale -= h;
    const double numeric = (eval(plus) - eval(minus)) / (2 * h);
    CHECK(std::abs(numeric - grad_scale) < 1e-6);
  }
}
