#include "arthoi/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "arthoi/optimize.hpp"

namespace arthoi {

namespace {

inline int pose_offset(int t, int joint) {
  return t * kFrameParamDim + 3 * joint;
}
inline int root_offset(int t) { return t * kFrameParamDim + kNumJoints * 3; }

// Pulls a world-point gradient back to the packed parameter vector.
void add_point_gradient(const FkFrame& fkf, const BodyParams& params, int t,
                        int joint, const Vec3& point, const Vec3& dL_dpoint,
                        Eigen::VectorXd* grad) {
  Vec3 root = Vec3::Zero();
  double scale = 0.0;
  accumulate_point_gradient(fkf, params, t, joint, point, dL_dpoint,
                            grad->data() + t * kFrameParamDim, &root, &scale);
  (*grad)[root_offset(t) + 0] += root.x();
  (*grad)[root_offset(t) + 1] += root.y();
  (*grad)[root_offset(t) + 2] += root.z();
  (*grad)[grad->size() - 1] += scale;
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const PinholeCamera& cam,
                                                const Vec3& p_world) {
  const Vec3 pc = cam.to_camera(p_world);
  const double z = pc.z();
  Eigen::Matrix<double, 2, 3> j_cam;
  j_cam << cam.fx / z, 0.0, -cam.fx * pc.x() / (z * z),
      0.0, cam.fy / z, -cam.fy * pc.y() / (z * z);
  return j_cam * cam.world_to_camera.rotation.matrix();
}
// Currently unused but kept alongside the other camera chain helpers.
[[maybe_unused]] auto* unused_projection_jacobian = &projection_jacobian;

std::vector<Splat> posed_bundle_splats(
    const std::vector<Splat>& splats, const std::vector<uint8_t>& dynamic,
    const RigidTransform& T) {
  std::vector<Splat> posed = splats;
  for (size_t i = 0; i < posed.size(); ++i) {
    if (dynamic[i]) posed[i].mean = T.apply(posed[i].mean);
  }
  return posed;
}

// Connected components (4-neighborhood) of a binary mask.
std::vector<int> label_components(const Mask& mask, int* n_components) {
  std::vector<int> comp(mask.size(), -1);
  int next = 0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y) || comp[size_t(y) * mask.width + x] != -1) continue;
      std::queue<std::pair<int, int>> q;
      q.push({x, y});
      comp[size_t(y) * mask.width + x] = next;
      while (!q.empty()) {
        const auto [cx, cy] = q.front();
        q.pop();
        const int dx[4] = {1, -1, 0, 0};
        const int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + dx[k], ny = cy + dy[k];
          if (nx < 0 || nx >= mask.width || ny < 0 || ny >= mask.height)
            continue;
          if (!mask.at(nx, ny) || comp[size_t(ny) * mask.width + nx] != -1)
            continue;
          comp[size_t(ny) * mask.width + nx] = next;
          q.push({nx, ny});
        }
      }
      ++next;
    }
  }
  *n_components = next;
  return comp;
}

}  // namespace

std::vector<int> detect_contact_frames(
    const std::vector<RigidTransform>& trajectory, double rot_thresh_deg,
    double trans_thresh, int window) {
  const int T = int(trajectory.size());
  if (T < 2) throw std::invalid_argument("detect_contact_frames: need >= 2 frames");
  std::vector<uint8_t> raw(size_t(T), 0);
  for (int t = 1; t < T; ++t) {
    const double rot = geodesic_angle_deg(trajectory[size_t(t - 1)].rotation,
                                          trajectory[size_t(t)].rotation);
    const double trans = (trajectory[size_t(t)].translation -
                          trajectory[size_t(t - 1)].translation)
                             .norm();
    raw[size_t(t)] = (rot > rot_thresh_deg || trans > trans_thresh) ? 1 : 0;
  }
  const int half = window / 2;
  std::vector<int> out;
  for (int t = 0; t < T; ++t) {
    bool active = false;
    for (int k = std::max(0, t - half); k <= std::min(T - 1, t + half); ++k) {
      active |= raw[size_t(k)] != 0;
    }
    if (active) out.push_back(t);
  }
  return out;
}

Mask contact_region(const Mask& m_human, const Mask& rendered_silhouette,
                    const Mask& m_object_sam) {
  if (m_human.width != rendered_silhouette.width ||
      m_human.height != rendered_silhouette.height ||
      m_human.width != m_object_sam.width ||
      m_human.height != m_object_sam.height) {
    throw std::invalid_argument("contact_region: mask dimension mismatch");
  }
  Mask out(m_human.width, m_human.height, 0);
  for (size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] =
        (m_human.data[i] && rendered_silhouette.data[i] && !m_object_sam.data[i])
            ? 1
            : 0;
  }
  return out;
}

std::vector<int> assign_joints(const Mask& region, const BodyParams& params,
                               int frame, const PinholeCamera& cam,
                               double conf_thresh,
                               const std::array<double, kNumJoints>& confidence) {
  const FkFrame fkf = fk(params, frame);
  std::vector<int> out;
  for (int j : {int(kLWrist), int(kRWrist)}) {
    if (confidence[size_t(j)] < conf_thresh) continue;
    const ProjectedPoint p = project(cam, fkf.joint_pos[size_t(j)]);
    if (!p.valid) continue;
    const int px = int(std::lround(p.pixel.x()));
    const int py = int(std::lround(p.pixel.y()));
    if (!region.in_bounds(px, py) || !region.at(px, py)) continue;
    out.push_back(j);
  }
  return out;
}

std::optional<ContactEvent> lift_contact(const Vec2& joint_pixel,
                                         const std::vector<Splat>& posed_dynamic,
                                         const std::vector<int>& splat_indices,
                                         const PinholeCamera& cam, int K,
                                         double offset) {
  struct Cand {
    double d2;
    double depth;
    int local;
  };
  std::vector<Cand> cands;
  for (size_t i = 0; i < posed_dynamic.size(); ++i) {
    const ProjectedPoint p = project(cam, posed_dynamic[i].mean);
    if (!p.valid) continue;
    cands.push_back({(p.pixel - joint_pixel).squaredNorm(), p.depth, int(i)});
  }
  if (cands.empty()) return std::nullopt;
  const int take = std::min<int>(K, int(cands.size()));
  std::partial_sort(cands.begin(), cands.begin() + take, cands.end(),
                    [](const Cand& a, const Cand& b) {
                      if (a.d2 != b.d2) return a.d2 < b.d2;
                      return a.local < b.local;
                    });
  cands.resize(size_t(take));
  const Cand* best = &cands[0];
  for (const Cand& c : cands) {
    if (c.depth < best->depth ||
        (c.depth == best->depth && c.local < best->local)) {
      best = &c;
    }
  }
  const Vec3 mean = posed_dynamic[size_t(best->local)].mean;
  const Vec3 to_cam = (cam.center() - mean).normalized();
  ContactEvent ev;
  ev.frame = -1;
  ev.joint = -1;
  ev.target = mean + offset * to_cam;
  ev.source_splat = splat_indices[size_t(best->local)];
  return ev;
}

std::vector<ContactEvent> derive_contacts(
    const ObservationBundle& bundle,
    const std::vector<RigidTransform>& trajectory,
    const std::vector<uint8_t>& dynamic_labels, const Stage2Config& cfg) {
  std::vector<ContactEvent> out;
  const std::vector<int> frames =
      detect_contact_frames(trajectory, cfg.contact_rot_thresh_deg,
                            cfg.contact_trans_thresh, cfg.contact_window);

  std::vector<Splat> dyn_canonical;
  std::vector<int> dyn_indices;
  for (size_t i = 0; i < bundle.splats_canonical.size(); ++i) {
    if (dynamic_labels[i]) {
      dyn_canonical.push_back(bundle.splats_canonical[i]);
      dyn_indices.push_back(int(i));
    }
  }
  if (dyn_canonical.empty()) return out;

  for (int t : frames) {
    const std::vector<Splat> posed = posed_bundle_splats(
        bundle.splats_canonical, dynamic_labels, trajectory[size_t(t)]);
    const Mask sil = binarize(render_silhouette(posed, bundle.camera, cfg.render),
                              cfg.render.alpha_threshold);
    const Mask region = contact_region(bundle.mask_human[size_t(t)], sil,
                                       bundle.mask_object_sam[size_t(t)]);
    int n_comp = 0;
    const std::vector<int> comp = label_components(region, &n_comp);
    if (n_comp == 0) continue;

    const std::vector<int> joints =
        assign_joints(region, bundle.body_init, t, bundle.camera,
                      cfg.conf_thresh, bundle.joint_confidence);
    if (joints.empty()) continue;

    std::vector<Splat> posed_dyn(dyn_canonical);
    for (Splat& s : posed_dyn) s.mean = trajectory[size_t(t)].apply(s.mean);

    const FkFrame fkf = fk(bundle.body_init, t);
    for (int j : joints) {
      const ProjectedPoint jp = project(bundle.camera, fkf.joint_pos[size_t(j)]);
      if (!jp.valid) continue;
      const int px = int(std::lround(jp.pixel.x()));
      const int py = int(std::lround(jp.pixel.y()));
      // Lift from the centroid of the region component the joint falls in:
      // the region is observation-derived and localizes the contact better
      // than the noisy initial pose.
      const int cid = comp[size_t(py) * region.width + px];
      Vec2 lift_px = jp.pixel;
      if (cid >= 0) {
        double sx = 0, sy = 0, n = 0;
        for (int y = 0; y < region.height; ++y) {
          for (int x = 0; x < region.width; ++x) {
            if (comp[size_t(y) * region.width + x] == cid) {
              sx += x;
              sy += y;
              n += 1;
            }
          }
        }
        lift_px = Vec2(sx / n, sy / n);
      }
      auto lifted = lift_contact(lift_px, posed_dyn, dyn_indices,
                                 bundle.camera, cfg.lift_k, cfg.lift_offset);
      if (!lifted) continue;
      lifted->frame = t;
      lifted->joint = j;
      out.push_back(*lifted);
    }
  }
  return out;
}

Eigen::VectorXd pack_params(const BodyParams& p) {
  const int F = p.frames();
  Eigen::VectorXd v(F * kFrameParamDim + 1);
  for (int t = 0; t < F; ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      for (int k = 0; k < 3; ++k) {
        v[pose_offset(t, j) + k] = p.joint_rotvec[size_t(t)][size_t(j)][k];
      }
    }
    for (int k = 0; k < 3; ++k) {
      v[root_offset(t) + k] = p.root_translation[size_t(t)][k];
    }
  }
  v[v.size() - 1] = p.shape_scale;
  return v;
}

BodyParams unpack_params(const Eigen::VectorXd& v, int frames) {
  BodyParams p;
  p.resize(frames);
  for (int t = 0; t < frames; ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      for (int k = 0; k < 3; ++k) {
        p.joint_rotvec[size_t(t)][size_t(j)][k] = v[pose_offset(t, j) + k];
      }
    }
    for (int k = 0; k < 3; ++k) {
      p.root_translation[size_t(t)][k] = v[root_offset(t) + k];
    }
  }
  p.shape_scale = v[v.size() - 1];
  return p;
}

double loss_kinematic(const BodyParams& params,
                      const std::vector<FkFrame>& fk_frames,
                      const std::vector<ContactEvent>& contacts,
                      Eigen::VectorXd* grad) {
  double total = 0.0;
  for (const ContactEvent& c : contacts) {
    const FkFrame& fkf = fk_frames[size_t(c.frame)];
    const Vec3 jp = fkf.joint_pos[size_t(c.joint)];
    const Vec3 diff = jp - c.target;
    const double v = diff.squaredNorm();
    if (!std::isfinite(v)) {
      throw Stage2Error("non-finite kinematic loss at frame " +
                        std::to_string(c.frame));
    }
    total += v;
    if (grad) {
      add_point_gradient(fkf, params, c.frame, c.joint, jp, 2.0 * diff, grad);
    }
  }
  return total;
}

double loss_prior(const BodyParams& params, const BodyParams& init, double eta,
                  Eigen::VectorXd* grad) {
  double total = 0.0;
  const int F = params.frames();
  const double wa = 1.0 + eta;  // joint angles appear in both prior terms
  for (int t = 0; t < F; ++t) {
    const Vec3 droot =
        params.root_translation[size_t(t)] - init.root_translation[size_t(t)];
    total += droot.squaredNorm();
    if (grad) {
      for (int k = 0; k < 3; ++k) (*grad)[root_offset(t) + k] += 2.0 * droot[k];
    }
    for (int j = 0; j < kNumJoints; ++j) {
      const Vec3 dpsi = params.joint_rotvec[size_t(t)][size_t(j)] -
                        init.joint_rotvec[size_t(t)][size_t(j)];
      total += wa * dpsi.squaredNorm();
      if (grad) {
        for (int k = 0; k < 3; ++k) {
          (*grad)[pose_offset(t, j) + k] += 2.0 * wa * dpsi[k];
        }
      }
    }
  }
  const double dscale = params.shape_scale - init.shape_scale;
  total += dscale * dscale;
  if (grad) (*grad)[grad->size() - 1] += 2.0 * dscale;
  if (!std::isfinite(total)) throw Stage2Error("non-finite prior loss");
  return total;
}

double loss_footslide(const BodyParams& params,
                      const std::vector<FkFrame>& fk_frames,
                      const std::vector<std::array<uint8_t, 2>>& foot_flags,
                      Eigen::VectorXd* grad) {
  double total = 0.0;
  const int F = params.frames();
  for (int side = 0; side < 2; ++side) {
    const std::vector<int> verts = foot_vertices_of_side(side == 0 ? -1 : 1);
    const auto& surface = body_surface_vertices();
    int t = 0;
    while (t < F) {
      if (!foot_flags[size_t(t)][size_t(side)]) {
        ++t;
        continue;
      }
      int end = t;
      while (end + 1 < F && foot_flags[size_t(end + 1)][size_t(side)]) ++end;
      const int len = end - t + 1;
      for (int vi : verts) {
        Vec3 mean = Vec3::Zero();
        for (int s = t; s <= end; ++s) {
          mean += fk_frames[size_t(s)].vertex_position(surface[size_t(vi)]);
        }
        mean /= double(len);
        for (int s = t; s <= end; ++s) {
          const Vec3 pos =
              fk_frames[size_t(s)].vertex_position(surface[size_t(vi)]);
          const Vec3 dev = pos - mean;
          total += dev.squaredNorm();
          if (grad) {
            // Cross-frame terms through the interval mean cancel exactly.
            add_point_gradient(fk_frames[size_t(s)], params, s,
                               surface[size_t(vi)].joint, pos, 2.0 * dev,
                               grad);
          }
        }
      }
      t = end + 1;
    }
  }
  if (!std::isfinite(total)) throw Stage2Error("non-finite footslide loss");
  return total;
}

double loss_collision(const BodyParams& params,
                      const std::vector<FkFrame>& fk_frames,
                      const std::vector<std::vector<Vec3>>& object_samples,
                      double delta, Eigen::VectorXd* grad) {
  double total = 0.0;
  const auto& surface = body_surface_vertices();
  static const std::vector<int> hand_verts = vertices_with_tag(VertexTag::Hand);
  const int F = params.frames();
  for (int t = 0; t < F; ++t) {
    const auto& samples = object_samples[size_t(t)];
    for (int vi : hand_verts) {
      const Vec3 v = fk_frames[size_t(t)].vertex_position(surface[size_t(vi)]);
      for (const Vec3& q : samples) {
        const Vec3 diff = v - q;
        const double d = diff.norm();
        if (d >= delta) continue;
        total += delta - d;
        if (grad && d > 1e-12) {
          add_point_gradient(fk_frames[size_t(t)], params, t,
                             surface[size_t(vi)].joint, v, -diff / d, grad);
        }
      }
    }
  }
  if (!std::isfinite(total)) throw Stage2Error("non-finite collision loss");
  return total;
}

double loss_smoothness_body(const BodyParams& params, Eigen::VectorXd* grad) {
  const int F = params.frames();
  double total = 0.0;
  if (F < 3) return 0.0;
  const int dim = kFrameParamDim;
  auto coord = [&](int t, int k) -> double {
    if (k < kNumJoints * 3) {
      return params.joint_rotvec[size_t(t)][size_t(k / 3)][k % 3];
    }
    return params.root_translation[size_t(t)][k - kNumJoints * 3];
  };
  for (int t = 2; t < F; ++t) {
    for (int k = 0; k < dim; ++k) {
      const double d = coord(t, k) - 2.0 * coord(t - 1, k) + coord(t - 2, k);
      total += d * d;
      if (grad) {
        (*grad)[t * dim + k] += 2.0 * d;
        (*grad)[(t - 1) * dim + k] += -4.0 * d;
        (*grad)[(t - 2) * dim + k] += 2.0 * d;
      }
    }
  }
  if (!std::isfinite(total)) throw Stage2Error("non-finite smoothness loss");
  return total;
}

PinholeCamera scale_camera(const PinholeCamera& cam, int scale) {
  PinholeCamera out = cam;
  out.fx /= scale;
  out.fy /= scale;
  out.cx /= scale;
  out.cy /= scale;
  out.width = cam.width / scale;
  out.height = cam.height / scale;
  return out;
}

Mask downsample_mask(const Mask& mask, int scale) {
  Mask out(mask.width / scale, mask.height / scale, 0);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.at(x, y) = mask.at(x * scale + scale / 2, y * scale + scale / 2);
    }
  }
  return out;
}

double loss_silhouette_human(const BodyParams& params,
                             const std::vector<FkFrame>& fk_frames,
                             const std::vector<Mask>& masks,
                             const PinholeCamera& cam, double beta_h,
                             int scale, const RenderConfig& rc,
                             Eigen::VectorXd* grad) {
  const PinholeCamera cam_s = scale > 1 ? scale_camera(cam, scale) : cam;
  const auto& surface = body_surface_vertices();
  double total = 0.0;
  const int F = params.frames();
  for (int t = 0; t < F; ++t) {
    const std::vector<Splat> splats = body_splats(fk_frames[size_t(t)]);
    const AlphaImage alpha = render_silhouette(splats, cam_s, rc);
    const Mask& mask = masks[size_t(t)];
    const double inv_n = 1.0 / double(alpha.size());
    AlphaImage residual(alpha.width, alpha.height, 0.0);
    for (size_t i = 0; i < alpha.data.size(); ++i) {
      const double diff = alpha.data[i] - double(mask.data[i]);
      total += beta_h * diff * diff * inv_n;
      residual.data[i] = 2.0 * beta_h * diff * inv_n;
    }
    if (grad) {
      const std::vector<Vec3> mean_grads =
          silhouette_backward(splats, cam_s, residual, rc);
      for (size_t vi = 0; vi < splats.size(); ++vi) {
        if (mean_grads[vi].isZero()) continue;
        add_point_gradient(fk_frames[size_t(t)], params, t,
                           surface[vi].joint, splats[vi].mean, mean_grads[vi],
                           grad);
      }
    }
  }
  if (!std::isfinite(total)) throw Stage2Error("non-finite silhouette loss");
  return total;
}

std::vector<Vec3> sample_object_points(const std::vector<Splat>& splats,
                                       const std::vector<uint8_t>& dynamic_labels,
                                       int n) {
  std::vector<Vec3> pool;
  for (size_t i = 0; i < splats.size(); ++i) {
    if (dynamic_labels[i]) pool.push_back(splats[i].mean);
  }
  if (pool.empty() || n <= 0) return {};
  if (int(pool.size()) <= n) return pool;

  // Farthest-point sampling from the first pool element.
  std::vector<Vec3> out;
  std::vector<double> dist(pool.size(), std::numeric_limits<double>::max());
  int current = 0;
  out.push_back(pool[0]);
  for (int k = 1; k < n; ++k) {
    double best = -1.0;
    int best_i = 0;
    for (size_t i = 0; i < pool.size(); ++i) {
      dist[i] = std::min(dist[i], (pool[i] - pool[size_t(current)]).squaredNorm());
      if (dist[i] > best) {
        best = dist[i];
        best_i = int(i);
      }
    }
    current = best_i;
    out.push_back(pool[size_t(best_i)]);
  }
  return out;
}

Stage2Result run_stage2(const ObservationBundle& bundle,
                        const std::vector<RigidTransform>& trajectory,
                        const std::vector<uint8_t>& dynamic_labels,
                        const Stage2Config& cfg) {
  Stage2Result result;
  result.contacts = derive_contacts(bundle, trajectory, dynamic_labels, cfg);

  const int F = bundle.frames;
  const std::vector<Vec3> canonical_samples = sample_object_points(
      bundle.splats_canonical, dynamic_labels, cfg.n_object_samples);
  std::vector<std::vector<Vec3>> object_samples(static_cast<size_t>(F));
  for (int t = 0; t < F; ++t) {
    object_samples[size_t(t)].reserve(canonical_samples.size());
    for (const Vec3& q : canonical_samples) {
      object_samples[size_t(t)].push_back(trajectory[size_t(t)].apply(q));
    }
  }
  std::vector<Mask> masks_ds(static_cast<size_t>(F));
  for (int t = 0; t < F; ++t) {
    masks_ds[size_t(t)] = cfg.silhouette_scale > 1
                              ? downsample_mask(bundle.mask_human[size_t(t)],
                                                cfg.silhouette_scale)
                              : bundle.mask_human[size_t(t)];
  }

  Eigen::VectorXd params = pack_params(bundle.body_init);
  const int dim = int(params.size());
  Eigen::VectorXd lr(dim);
  for (int t = 0; t < F; ++t) {
    for (int k = 0; k < kNumJoints * 3; ++k) {
      lr[t * kFrameParamDim + k] = cfg.lr_pose;
    }
    for (int k = 0; k < 3; ++k) lr[root_offset(t) + k] = cfg.lr_root;
  }
  lr[dim - 1] = cfg.lr_root;

  AdamState adam(dim);
  double best_total = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_params = params;

  auto evaluate = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad,
                      Stage2LossTerms* terms) {
    const BodyParams p = unpack_params(x, F);
    std::vector<FkFrame> fks(static_cast<size_t>(F));
    for (int t = 0; t < F; ++t) fks[size_t(t)] = fk(p, t);
    if (grad) grad->setZero();

    Eigen::VectorXd tmp;
    Eigen::VectorXd* g = grad;
    Stage2LossTerms lt;
    Eigen::VectorXd gs = grad ? Eigen::VectorXd::Zero(dim) : Eigen::VectorXd();

    auto weighted = [&](double w, double v, Eigen::VectorXd* dst,
                        const Eigen::VectorXd& src) {
      if (dst && src.size()) *dst += w * src;
      return w * v;
    };

    double total = 0.0;
    {
      Eigen::VectorXd gg = g ? Eigen::VectorXd::Zero(dim) : Eigen::VectorXd();
      lt.silhouette = loss_silhouette_human(p, fks, masks_ds, bundle.camera,
                                            cfg.beta_h, cfg.silhouette_scale,
                                            cfg.render, g ? &gg : nullptr);
      total += weighted(1.0, lt.silhouette, g, gg);
    }
    {
      Eigen::VectorXd gg = g ? Eigen::VectorXd::Zero(dim) : Eigen::VectorXd();
      lt.kinematic = loss_kinematic(p, fks, result.contacts, g ? &gg : nullptr);
      total += weighted(cfg.lambda_k, lt.kinematic, g, gg);
    }
    {
      Eigen::VectorXd gg = g ? Eigen::VectorXd::Zero(dim) : Eigen::VectorXd();
      lt.prior = loss_prior(p, bundle.body_init, cfg.eta, g ? &gg : nullptr);
      total += weighted(cfg.lambda_p, lt.prior, g, gg);
    }
    {
      Eigen::VectorXd gg = g ? Eigen::VectorXd::Zero(dim) : Eigen::VectorXd();
      lt.footslide = loss_footslide(p, fks, bundle.foot_contact_flags,
                                    g ? &gg : nullptr);
      total += weighted(cfg.lambda_fs, lt.footslide, g, gg);
    }
    {
      Eigen::VectorXd gg = g ? Eigen::VectorXd::Zero(dim) : Eigen::VectorXd();
      lt.smoothness = loss_smoothness_body(p, g ? &gg : nullptr);
      total += weighted(cfg.lambda_s, lt.smoothness, g, gg);
    }
    {
      Eigen::VectorXd gg = g ? Eigen::VectorXd::Zero(dim) : Eigen::VectorXd();
      lt.collision = loss_collision(p, fks, object_samples, cfg.delta,
                                    g ? &gg : nullptr);
      total += weighted(cfg.lambda_c, lt.collision, g, gg);
    }
    lt.total = total;
    if (terms) *terms = lt;
    (void)tmp;
  };

  Eigen::VectorXd grad(dim);
  for (int iter = 0; iter < cfg.iters; ++iter) {
    Stage2LossTerms terms;
    evaluate(params, &grad, &terms);
    result.loss_log.push_back(terms);
    if (terms.total < best_total) {
      best_total = terms.total;
      best_params = params;
      result.best = terms;
      result.best_iter = iter;
    }
    const Eigen::VectorXd clipped = clip_grad_norm(grad, cfg.grad_clip_norm);
    adam_step(adam, params, clipped, lr);
  }
  {
    Stage2LossTerms terms;
    evaluate(params, nullptr, &terms);
    if (terms.total < best_total) {
      best_total = terms.total;
      best_params = params;
      result.best = terms;
      result.best_iter = cfg.iters;
    }
  }
  result.refined = unpack_params(best_params, F);
  return result;
}

}  // namespace arthoi
