// Simplified parametric skeleton: 16 joints with fixed bone topology, a
// global shape scale, and capsule-sampled surface splats rigidly attached to
// bones. Carries the joints and hand/foot vertex sets the refinement losses
// and interaction metrics need.

#pragma once

#include <array>
#include <string>
#include <vector>

#include "arthoi/geometry.hpp"
#include "arthoi/splat.hpp"

namespace arthoi {

constexpr int kNumJoints = 16;

enum Joint : int {
  kPelvis = 0,
  kSpine = 1,
  kLShoulder = 2,
  kLElbow = 3,
  kLWrist = 4,
  kRShoulder = 5,
  kRElbow = 6,
  kRWrist = 7,
  kLHip = 8,
  kLKnee = 9,
  kLAnkle = 10,
  kLToe = 11,
  kRHip = 12,
  kRKnee = 13,
  kRAnkle = 14,
  kRToe = 15,
};

const char* joint_name(int j);

/// Parent index per joint; pelvis is the root (-1).
const std::array<int, kNumJoints>& joint_parents();

/// Canonical bone offset from the parent joint, meters at shape scale 1.
const std::array<Vec3, kNumJoints>& joint_offsets();

enum class VertexTag : uint8_t { Other = 0, Hand = 1, Foot = 2 };

struct SurfaceVertex {
  int joint;        ///< joint whose frame the vertex is rigidly attached to
  Vec3 local;       ///< canonical offset in that joint's frame, unscaled
  double radius;    ///< capsule radius, used when splatting the body
  VertexTag tag;
  int side;         ///< -1 left, +1 right, 0 center
};

/// Canonical surface sampling; deterministic (no RNG), shared by the
/// simulator and Stage II.
const std::vector<SurfaceVertex>& body_surface_vertices();

/// Per-frame skeleton state for a whole sequence.
struct BodyParams {
  /// joint_rotvec[t][j] is the local axis-angle of joint j at frame t.
  std::vector<std::array<Vec3, kNumJoints>> joint_rotvec;
  /// root_translation[t] places the pelvis.
  std::vector<Vec3> root_translation;
  /// Global bone-length multiplier.
  double shape_scale = 1.0;

  int frames() const { return int(joint_rotvec.size()); }
  void resize(int n_frames) {
    joint_rotvec.assign(n_frames, {});
    for (auto& f : joint_rotvec) f.fill(Vec3::Zero());
    root_translation.assign(n_frames, Vec3::Zero());
  }
};

/// Forward-kinematics pose of one frame, with the cached per-joint frames
/// needed for analytic gradients.
struct FkFrame {
  std::array<Vec3, kNumJoints> joint_pos;
  std::array<Mat3, kNumJoints> joint_rot;       ///< world rotation, incl. own
  std::array<Mat3, kNumJoints> jr_t_rot_t;      ///< Jr(psi)^T * R^T per joint
  Vec3 root = Vec3::Zero();
  double scale = 1.0;

  Vec3 vertex_position(const SurfaceVertex& v) const {
    return joint_pos[v.joint] + scale * (joint_rot[v.joint] * v.local);
  }
};

FkFrame fk(const BodyParams& params, int frame);

/// Accumulates dL/d(pose, root, scale) for a world-space point gradient at a
/// point attached to `joint` (surface vertex or the joint itself).
/// grad_pose is laid out [joint0.xyz, joint1.xyz, ...] (48 values), followed
/// elsewhere by root (3) and scale (1) handled by the caller.
void accumulate_point_gradient(const FkFrame& fk_frame,
                               const BodyParams& params, int frame, int joint,
                               const Vec3& point_world, const Vec3& dL_dpoint,
                               double* grad_pose, Vec3* grad_root,
                               double* grad_scale);

/// Body splats at a posed frame: one splat per surface vertex.
std::vector<Splat> body_splats(const FkFrame& frame, double opacity = 0.9);

/// Indices into body_surface_vertices() by tag.
std::vector<int> vertices_with_tag(VertexTag tag);
std::vector<int> foot_vertices_of_side(int side);

}  // namespace arthoi
