#include "arthoi/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "arthoi/parallel.hpp"
#include "arthoi/rng.hpp"

namespace arthoi {

namespace {

double smoothstep01(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// Base standing pose: arms hanging, legs straight, facing +y.
void apply_base_pose(std::array<Vec3, kNumJoints>* pose) {
  pose->fill(Vec3::Zero());
  (*pose)[kLShoulder] = Vec3(0, -1.3, 0);
  (*pose)[kRShoulder] = Vec3(0, 1.3, 0);
}

Rotation from_two_vectors(const Vec3& a, const Vec3& b) {
  return Rotation(Eigen::Quaterniond::FromTwoVectors(a, b));
}

struct ArmSolution {
  Vec3 shoulder_rotvec;
  Vec3 elbow_rotvec;
  Vec3 wrist_rotvec;
};

// Closed-form two-link IK for the right arm (canonical direction +x), with
// the elbow pushed toward `hint` and the hand segment aimed at `hand_dir`.
ArmSolution solve_right_arm(const Vec3& shoulder, const Vec3& target,
                            double upper_len, double fore_len,
                            const Vec3& hint, const Vec3& hand_dir) {
  const Vec3 u0(1, 0, 0);
  Vec3 d = target - shoulder;
  double r = d.norm();
  const double r_min = std::max(std::abs(upper_len - fore_len) + 0.01, 0.05);
  const double r_max = upper_len + fore_len - 0.005;
  const double rc = std::clamp(r, r_min, r_max);
  const Vec3 dh = r > 1e-12 ? Vec3(d / r) : Vec3(0, 1, 0);
  const Vec3 eff_target = shoulder + rc * dh;

  const double cos_alpha =
      std::clamp((upper_len * upper_len + rc * rc - fore_len * fore_len) /
                     (2.0 * upper_len * rc),
                 -1.0, 1.0);
  const double alpha = std::acos(cos_alpha);

  Vec3 n = dh.cross(hint);
  if (n.norm() < 1e-9) n = dh.cross(Vec3(0, 0, 1));
  if (n.norm() < 1e-9) n = dh.cross(Vec3(1, 0, 0));
  n.normalize();
  // Rotating dh about n by alpha lands the elbow on the hint side.
  const Vec3 u = std::cos(alpha) * dh + std::sin(alpha) * n.cross(dh);
  const Vec3 elbow = shoulder + upper_len * u;
  const Vec3 f = (eff_target - elbow).normalized();

  const Rotation r_sh = from_two_vectors(u0, u);
  const Rotation r_el = from_two_vectors(u0, r_sh.inverse() * f);
  const Rotation r_fore = r_sh * r_el;
  const Rotation r_wr = from_two_vectors(u0, r_fore.inverse() * hand_dir);

  return {so3_log(r_sh), so3_log(r_el), so3_log(r_wr)};
}

}  // namespace

std::vector<Splat> posed_object_splats(const ArticulatedScene& scene, int t) {
  const RigidTransform T = gt_transform(scene, t);
  std::vector<Splat> splats = scene.static_splats;
  splats.reserve(splats.size() + scene.dynamic_splats_canonical.size());
  for (Splat s : scene.dynamic_splats_canonical) {
    s.mean = T.apply(s.mean);
    s.part_weight_dynamic = 1.0;
    splats.push_back(s);
  }
  return splats;
}

BodyMotion synthesize_body_motion(const ArticulatedScene& scene,
                                  double sigma_pose, double sigma_root,
                                  uint64_t seed) {
  const int frames = scene.frames();
  BodyMotion out;
  out.body_true.resize(frames);
  out.body_true.shape_scale = 1.0;
  out.foot_contact_flags.assign(size_t(frames), {1, 1});

  for (int t = 1; t < frames; ++t) {
    if (std::abs(scene.angle_trajectory[t] - scene.angle_trajectory[t - 1]) >
        0.0) {
      out.contact_frames.push_back(t);
    }
  }
  const int grasp_start =
      out.contact_frames.empty() ? frames : out.contact_frames.front() - 1;

  // Handle trajectory and pelvis placement. The shoulder goes radially
  // outward from the joint pivot past the mid-swing handle position, which
  // keeps the torso outside the swept arc of the door edge.
  std::vector<Vec3> handle(frames);
  for (int t = 0; t < frames; ++t) {
    handle[t] = gt_transform(scene, t).apply(scene.handle_point_canonical);
  }
  const Vec3 handle_mid = handle[frames / 2 < grasp_start
                                     ? std::min(frames - 1, grasp_start)
                                     : frames / 2];
  Vec3 radial = handle_mid - scene.joint.pivot;
  radial.z() = 0.0;
  if (radial.norm() < 1e-9) radial = Vec3(-1, -0.3, 0);
  radial.normalize();
  const double place_radius =
      scene.joint.kind == JointKind::Hinge
          ? (scene.handle_point_canonical - scene.joint.pivot).head<2>().norm() +
                0.19
          : 0.45;
  Vec3 shoulder_xy = scene.joint.pivot + place_radius * radial;
  if (scene.joint.kind == JointKind::Prismatic) {
    // Stand beside the drawer's travel corridor.
    shoulder_xy = scene.handle_point_canonical + Vec3(-0.35, -0.30, 0);
  }
  const double pelvis_z = 0.94;  // feet on the ground plane
  const Vec3 pelvis(shoulder_xy.x() - 0.20, shoulder_xy.y(), pelvis_z);
  const Vec3 shoulder(pelvis.x() + 0.20, pelvis.y(), pelvis_z + 0.60);

  const double upper_len = 0.32, fore_len = 0.30;

  // Rest wrist position of the hanging right arm.
  std::array<Vec3, kNumJoints> base;
  apply_base_pose(&base);
  BodyParams probe;
  probe.resize(1);
  probe.joint_rotvec[0] = base;
  probe.root_translation[0] = pelvis;
  const Vec3 wrist_rest = fk(probe, 0).joint_pos[kRWrist];

  const bool interacts = !out.contact_frames.empty();
  for (int t = 0; t < frames; ++t) {
    auto& pose = out.body_true.joint_rotvec[t];
    apply_base_pose(&pose);
    out.body_true.root_translation[t] = pelvis;
    if (!interacts) continue;  // nothing to grasp; stand still

    Vec3 target;
    if (t < grasp_start && grasp_start > 0) {
      const double u = smoothstep01(double(t) / double(grasp_start));
      target = wrist_rest + u * (handle[std::min(grasp_start, frames - 1)] -
                                 wrist_rest);
    } else {
      target = handle[t];
    }

    // Hand lies flat along the moving panel, pointing from handle toward
    // the joint pivot.
    const RigidTransform T = gt_transform(scene, t);
    Vec3 tangent = scene.joint.pivot - scene.handle_point_canonical;
    tangent.z() = 0.0;
    if (tangent.norm() < 1e-9) tangent = Vec3(1, 0, 0);
    const Vec3 hand_dir = (T.rotation * tangent).normalized();

    const Vec3 hint(0, -0.6, -1.0);
    const ArmSolution arm = solve_right_arm(shoulder, target, upper_len,
                                            fore_len, hint, hand_dir);
    pose[kRShoulder] = arm.shoulder_rotvec;
    pose[kRElbow] = arm.elbow_rotvec;
    pose[kRWrist] = arm.wrist_rotvec;
  }

  out.body_init = out.body_true;
  Rng rng(seed);
  for (int t = 0; t < frames; ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      for (int k = 0; k < 3; ++k) {
        out.body_init.joint_rotvec[t][j][k] += rng.normal(0.0, sigma_pose);
      }
    }
    for (int k = 0; k < 3; ++k) {
      out.body_init.root_translation[t][k] += rng.normal(0.0, sigma_root);
    }
  }
  return out;
}

TrackSet synthesize_tracks(const std::vector<Splat>& splats,
                           const std::vector<uint8_t>& dynamic_labels,
                           const ArticulatedScene& scene,
                           const PinholeCamera& cam, int n_points,
                           double noise_sigma_px, uint64_t seed,
                           const std::vector<DepthImage>* occluders,
                           const RenderConfig& cfg) {
  if (n_points <= 0) {
    throw std::invalid_argument("synthesize_tracks: n_points must be > 0");
  }
  (void)cfg;
  const int frames = scene.frames();
  Rng rng(seed);

  // Candidate splats visible at frame 0: projectable, inside the image and
  // not hidden behind the frame-0 occluder surface.
  std::vector<int> visible0;
  for (int i = 0; i < int(splats.size()); ++i) {
    const ProjectedPoint p = project(cam, splats[i].mean);
    if (!p.valid) continue;
    const int px = int(std::lround(p.pixel.x()));
    const int py = int(std::lround(p.pixel.y()));
    if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) continue;
    if (occluders && !occluders->empty()) {
      const double occ = (*occluders)[0].at(px, py);
      const double margin = std::max(0.04, 2.0 * splats[i].radius);
      if (occ < p.depth - margin) continue;
    }
    visible0.push_back(i);
  }
  if (visible0.empty()) {
    throw std::runtime_error("synthesize_tracks: no visible splats at frame 0");
  }

  TrackSet tracks;
  tracks.resize(n_points, frames);
  std::vector<RigidTransform> T(frames);
  for (int t = 0; t < frames; ++t) T[t] = gt_transform(scene, t);

  for (int p = 0; p < n_points; ++p) {
    const int si = visible0[rng.uniform_int(0, int(visible0.size()) - 1)];
    const bool dynamic = dynamic_labels[si] != 0;
    const Vec3 canonical = splats[si].mean;
    for (int t = 0; t < frames; ++t) {
      const Vec3 world = dynamic ? T[t].apply(canonical) : canonical;
      const ProjectedPoint proj = project(cam, world);
      // Noise drawn unconditionally to keep the stream stable across
      // visibility changes.
      const double nx = rng.normal(0.0, noise_sigma_px);
      const double ny = rng.normal(0.0, noise_sigma_px);
      bool vis = proj.valid;
      double x = 0.0, y = 0.0;
      if (proj.valid) {
        x = proj.pixel.x() + nx;
        y = proj.pixel.y() + ny;
        if (x < 0 || x >= cam.width || y < 0 || y >= cam.height) vis = false;
        if (vis && occluders && t < int(occluders->size())) {
          const int px = int(std::lround(proj.pixel.x()));
          const int py = int(std::lround(proj.pixel.y()));
          if (px >= 0 && px < cam.width && py >= 0 && py < cam.height) {
            const double occ = (*occluders)[t].at(px, py);
            const double margin = std::max(0.04, 2.0 * splats[si].radius);
            if (occ < proj.depth - margin) vis = false;
          }
        }
      }
      const size_t idx = tracks.idx(p, t);
      tracks.px[idx] = float(x);
      tracks.py[idx] = float(y);
      tracks.visible[idx] = vis ? 1 : 0;
    }
  }
  return tracks;
}

TrackSet synthesize_tracks(const ArticulatedScene& scene,
                           const PinholeCamera& cam, int n_points,
                           double noise_sigma_px, uint64_t seed) {
  std::vector<Splat> splats = scene.static_splats;
  std::vector<uint8_t> labels(splats.size(), 0);
  for (const Splat& s : scene.dynamic_splats_canonical) {
    splats.push_back(s);
    labels.push_back(1);
  }
  return synthesize_tracks(splats, labels, scene, cam, n_points,
                           noise_sigma_px, seed, nullptr);
}

FrameMasks synthesize_masks(const ArticulatedScene& scene,
                            const FkFrame& body_frame,
                            const PinholeCamera& cam, int t,
                            double body_opacity, const RenderConfig& cfg) {
  FrameMasks out;
  const std::vector<Splat> object = posed_object_splats(scene, t);
  const std::vector<Splat> body = body_splats(body_frame, body_opacity);

  const AlphaImage obj_alpha = render_silhouette(object, cam, cfg);
  const AlphaImage hum_alpha = render_silhouette(body, cam, cfg);
  out.object = binarize(obj_alpha, cfg.alpha_threshold);
  out.human = binarize(hum_alpha, cfg.alpha_threshold);

  const DepthImage obj_depth = render_depth(object, cam, cfg);
  const DepthImage hum_depth = render_depth(body, cam, cfg);
  out.object_sam = out.object;
  for (size_t i = 0; i < out.object_sam.data.size(); ++i) {
    if (out.object_sam.data[i] && hum_depth.data[i] < obj_depth.data[i]) {
      out.object_sam.data[i] = 0;
    }
  }
  return out;
}

void simulate_bundle(const SceneDescriptor& desc, const SimulationParams& sim,
                     ObservationBundle* bundle, GroundTruth* gt) {
  const ArticulatedScene scene = build_scene(desc);
  const int frames = scene.frames();
  const PinholeCamera cam = default_camera(scene, sim.image_width,
                                           sim.image_height, sim.fx, sim.fy);

  const BodyMotion motion = synthesize_body_motion(
      scene, sim.sigma_pose, sim.sigma_root, desc.seed + 1);

  // Bundle splat list: static + dynamic, shuffled so downstream code cannot
  // rely on ordering. Labels ride along for ground truth.
  std::vector<Splat> splats = scene.static_splats;
  std::vector<uint8_t> labels(splats.size(), 0);
  for (const Splat& s : scene.dynamic_splats_canonical) {
    splats.push_back(s);
    labels.push_back(1);
  }
  {
    Rng shuffle_rng(desc.seed + 2);
    for (int i = int(splats.size()) - 1; i > 0; --i) {
      const int j = shuffle_rng.uniform_int(0, i);
      std::swap(splats[size_t(i)], splats[size_t(j)]);
      std::swap(labels[size_t(i)], labels[size_t(j)]);
    }
  }

  // Per-frame masks and occluder depths (frames are independent).
  std::vector<FrameMasks> masks(frames);
  std::vector<DepthImage> occluders(frames);
  std::vector<FkFrame> body_frames(frames);
  for (int t = 0; t < frames; ++t) body_frames[t] = fk(motion.body_true, t);
  parallel_for(frames, [&](int t) {
    masks[t] = synthesize_masks(scene, body_frames[t], cam, t,
                                sim.body_opacity, sim.render);
    const std::vector<Splat> object = posed_object_splats(scene, t);
    DepthImage d = render_depth(object, cam, sim.render);
    const DepthImage hd =
        render_depth(body_splats(body_frames[t], sim.body_opacity), cam,
                     sim.render);
    for (size_t i = 0; i < d.data.size(); ++i) {
      d.data[i] = std::min(d.data[i], hd.data[i]);
    }
    occluders[t] = std::move(d);
  });

  bundle->camera = cam;
  bundle->frames = frames;
  bundle->meta.template_name = desc.template_name;
  bundle->meta.seed = desc.seed;
  bundle->meta.sigma_track = sim.sigma_track;
  bundle->meta.sigma_pose = sim.sigma_pose;
  bundle->meta.sigma_root = sim.sigma_root;
  bundle->meta.fps = sim.fps;
  bundle->tracks =
      synthesize_tracks(splats, labels, scene, cam, sim.n_track_points,
                        sim.sigma_track, desc.seed + 3, &occluders,
                        sim.render);
  bundle->splats_canonical = splats;
  bundle->body_init = motion.body_init;
  bundle->foot_contact_flags = motion.foot_contact_flags;
  bundle->joint_confidence.fill(1.0);
  bundle->mask_object.resize(frames);
  bundle->mask_human.resize(frames);
  bundle->mask_object_sam.resize(frames);
  for (int t = 0; t < frames; ++t) {
    bundle->mask_object[t] = std::move(masks[t].object);
    bundle->mask_human[t] = std::move(masks[t].human);
    bundle->mask_object_sam[t] = std::move(masks[t].object_sam);
  }

  if (gt) {
    gt->transforms.clear();
    for (int t = 0; t < frames; ++t) {
      gt->transforms.push_back(gt_transform(scene, t));
    }
    gt->splat_labels = labels;
    gt->body_true = motion.body_true;
    gt->contact_frames = motion.contact_frames;
    gt->joint = scene.joint;
    gt->handle_canonical = scene.handle_point_canonical;
    gt->surface = scene.surface;
  }
}

}  // namespace arthoi
