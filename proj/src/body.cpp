#include "arthoi/body.hpp"

#include <cmath>
#include <stdexcept>

namespace arthoi {

namespace {

const std::array<const char*, kNumJoints> kJointNames = {
    "pelvis",     "spine",      "l_shoulder", "l_elbow",
    "l_wrist",    "r_shoulder", "r_elbow",    "r_wrist",
    "l_hip",      "l_knee",     "l_ankle",    "l_toe",
    "r_hip",      "r_knee",     "r_ankle",    "r_toe"};

const std::array<int, kNumJoints> kParents = {
    -1,  // pelvis
    0,   // spine
    1, 2, 3,   // left arm off the spine
    1, 5, 6,   // right arm
    0, 8, 9, 10,   // left leg
    0, 12, 13, 14  // right leg
};

// Canonical pose: standing, facing +y, arms in T-pose along +-x, z up.
const std::array<Vec3, kNumJoints> kOffsets = {
    Vec3(0, 0, 0),           // pelvis (root)
    Vec3(0, 0, 0.22),        // spine
    Vec3(-0.20, 0, 0.38),    // l_shoulder
    Vec3(-0.28, 0, 0),       // l_elbow
    Vec3(-0.26, 0, 0),       // l_wrist
    Vec3(0.20, 0, 0.38),     // r_shoulder
    Vec3(0.28, 0, 0),        // r_elbow
    Vec3(0.26, 0, 0),        // r_wrist
    Vec3(-0.10, 0, -0.05),   // l_hip
    Vec3(0, 0, -0.42),       // l_knee
    Vec3(0, 0, -0.40),       // l_ankle
    Vec3(0, 0.16, -0.07),    // l_toe
    Vec3(0.10, 0, -0.05),    // r_hip
    Vec3(0, 0, -0.42),       // r_knee
    Vec3(0, 0, -0.40),       // r_ankle
    Vec3(0, 0.16, -0.07),    // r_toe
};

struct BoneSpec {
  int joint;       // frame the samples attach to
  Vec3 a, b;       // segment endpoints in that joint's canonical frame
  double radius;
  int rings;       // samples along the segment
  int around;      // samples per ring
  VertexTag tag;
  int side;
};

std::vector<SurfaceVertex> build_surface() {
  // Segment table. Limb segments live in the frame of their proximal joint
  // and run to the child's canonical offset; leaf joints get terminal
  // extensions (head above the spine, hands past the wrists, toe tips).
  const std::vector<BoneSpec> bones = {
      {kPelvis, Vec3(0, 0, -0.05), Vec3(0, 0, 0.22), 0.12, 3, 8,
       VertexTag::Other, 0},
      {kSpine, Vec3(0, 0, 0), Vec3(0, 0, 0.38), 0.12, 3, 8, VertexTag::Other,
       0},
      // head on top of the torso
      {kSpine, Vec3(0, 0, 0.44), Vec3(0, 0, 0.60), 0.09, 2, 6,
       VertexTag::Other, 0},
      {kLShoulder, Vec3(0, 0, 0), Vec3(-0.28, 0, 0), 0.05, 3, 5,
       VertexTag::Other, -1},
      {kLElbow, Vec3(0, 0, 0), Vec3(-0.26, 0, 0), 0.045, 3, 5,
       VertexTag::Other, -1},
      {kLWrist, Vec3(0, 0, 0), Vec3(-0.14, 0, 0), 0.04, 3, 5, VertexTag::Hand,
       -1},
      {kRShoulder, Vec3(0, 0, 0), Vec3(0.28, 0, 0), 0.05, 3, 5,
       VertexTag::Other, 1},
      {kRElbow, Vec3(0, 0, 0), Vec3(0.26, 0, 0), 0.045, 3, 5,
       VertexTag::Other, 1},
      {kRWrist, Vec3(0, 0, 0), Vec3(0.14, 0, 0), 0.04, 3, 5, VertexTag::Hand,
       1},
      {kLHip, Vec3(0, 0, 0), Vec3(0, 0, -0.42), 0.07, 4, 5, VertexTag::Other,
       -1},
      {kLKnee, Vec3(0, 0, 0), Vec3(0, 0, -0.40), 0.055, 4, 5,
       VertexTag::Other, -1},
      {kLAnkle, Vec3(0, 0, 0), Vec3(0, 0.16, -0.07), 0.05, 3, 5,
       VertexTag::Foot, -1},
      {kLToe, Vec3(0, 0, 0), Vec3(0, 0.08, 0), 0.035, 2, 4, VertexTag::Foot,
       -1},
      {kRHip, Vec3(0, 0, 0), Vec3(0, 0, -0.42), 0.07, 4, 5, VertexTag::Other,
       1},
      {kRKnee, Vec3(0, 0, 0), Vec3(0, 0, -0.40), 0.055, 4, 5,
       VertexTag::Other, 1},
      {kRAnkle, Vec3(0, 0, 0), Vec3(0, 0.16, -0.07), 0.05, 3, 5,
       VertexTag::Foot, 1},
      {kRToe, Vec3(0, 0, 0), Vec3(0, 0.08, 0), 0.035, 2, 4, VertexTag::Foot,
       1},
  };

  std::vector<SurfaceVertex> verts;
  for (const BoneSpec& bone : bones) {
    const Vec3 axis = bone.b - bone.a;
    const double len = axis.norm();
    Vec3 u = len > 1e-12 ? Vec3(axis / len) : Vec3(0, 0, 1);
    // Orthonormal frame around the segment axis.
    Vec3 e1 = u.cross(Vec3(0, 0, 1));
    if (e1.norm() < 1e-6) e1 = u.cross(Vec3(1, 0, 0));
    e1.normalize();
    const Vec3 e2 = u.cross(e1);
    for (int r = 0; r < bone.rings; ++r) {
      const double t =
          bone.rings == 1 ? 0.5 : double(r) / double(bone.rings - 1);
      const Vec3 center = bone.a + t * axis;
      for (int k = 0; k < bone.around; ++k) {
        const double phi = 2.0 * M_PI * (double(k) + 0.5 * (r % 2)) /
                           double(bone.around);
        const Vec3 p =
            center + bone.radius * (std::cos(phi) * e1 + std::sin(phi) * e2);
        verts.push_back({bone.joint, p, bone.radius, bone.tag, bone.side});
      }
    }
  }
  return verts;
}

}  // namespace

const char* joint_name(int j) { return kJointNames.at(size_t(j)); }

const std::array<int, kNumJoints>& joint_parents() { return kParents; }

const std::array<Vec3, kNumJoints>& joint_offsets() { return kOffsets; }

const std::vector<SurfaceVertex>& body_surface_vertices() {
  static const std::vector<SurfaceVertex> verts = build_surface();
  return verts;
}

FkFrame fk(const BodyParams& params, int frame) {
  if (frame < 0 || frame >= params.frames()) {
    throw std::out_of_range("fk: frame out of range");
  }
  FkFrame out;
  out.root = params.root_translation[frame];
  out.scale = params.shape_scale;
  const auto& pose = params.joint_rotvec[frame];
  for (int j = 0; j < kNumJoints; ++j) {
    const Mat3 local = so3_exp(pose[j]).matrix();
    const int parent = kParents[j];
    if (parent < 0) {
      out.joint_pos[j] = out.root;
      out.joint_rot[j] = local;
    } else {
      out.joint_pos[j] =
          out.joint_pos[parent] + out.scale * (out.joint_rot[parent] * kOffsets[j]);
      out.joint_rot[j] = out.joint_rot[parent] * local;
    }
    out.jr_t_rot_t[j] =
        so3_right_jacobian(pose[j]).transpose() * out.joint_rot[j].transpose();
  }
  return out;
}

void accumulate_point_gradient(const FkFrame& fk_frame,
                               const BodyParams& params, int frame, int joint,
                               const Vec3& point_world, const Vec3& dL_dpoint,
                               double* grad_pose, Vec3* grad_root,
                               double* grad_scale) {
  (void)params;
  (void)frame;
  // Rotating any ancestor joint a moves the point rigidly about that joint:
  // dp/dpsi_a = -[p - pos_a]x * R_a * Jr(psi_a), so the pulled-back gradient
  // is Jr^T R^T ((p - pos_a) x g).
  int a = joint;
  while (a >= 0) {
    const Vec3 lever = point_world - fk_frame.joint_pos[a];
    const Vec3 g = fk_frame.jr_t_rot_t[a] * lever.cross(dL_dpoint);
    grad_pose[3 * a + 0] += g.x();
    grad_pose[3 * a + 1] += g.y();
    grad_pose[3 * a + 2] += g.z();
    a = kParents[a];
  }
  if (grad_root) *grad_root += dL_dpoint;
  if (grad_scale) {
    // Positions are linear in the shape scale: p = root + scale * (...).
    *grad_scale +=
        dL_dpoint.dot(point_world - fk_frame.root) / fk_frame.scale;
  }
}

std::vector<Splat> body_splats(const FkFrame& frame, double opacity) {
  const auto& verts = body_surface_vertices();
  std::vector<Splat> splats;
  splats.reserve(verts.size());
  for (const SurfaceVertex& v : verts) {
    Splat s;
    s.mean = frame.vertex_position(v);
    s.radius = v.radius * frame.scale;
    s.opacity = opacity;
    s.part_weight_dynamic = 0.0;
    splats.push_back(s);
  }
  return splats;
}

std::vector<int> vertices_with_tag(VertexTag tag) {
  std::vector<int> out;
  const auto& verts = body_surface_vertices();
  for (int i = 0; i < int(verts.size()); ++i) {
    if (verts[i].tag == tag) out.push_back(i);
  }
  return out;
}

std::vector<int> foot_vertices_of_side(int side) {
  std::vector<int> out;
  const auto& verts = body_surface_vertices();
  for (int i = 0; i < int(verts.size()); ++i) {
    if (verts[i].tag == VertexTag::Foot && verts[i].side == side)
      out.push_back(i);
  }
  return out;
}

}  // namespace arthoi
