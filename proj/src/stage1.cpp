#include "arthoi/stage1.hpp"

#include <algorithm>
#include <cmath>

#include "arthoi/optimize.hpp"

namespace arthoi {

namespace {

// dpixel/dp_world for a projected point (2x3), i.e. the pinhole Jacobian
// composed with the world-to-camera rotation.
Eigen::Matrix<double, 2, 3> projection_jacobian(const PinholeCamera& cam,
                                                const Vec3& p_world) {
  const Vec3 pc = cam.to_camera(p_world);
  const double z = pc.z();
  Eigen::Matrix<double, 2, 3> j_cam;
  j_cam << cam.fx / z, 0.0, -cam.fx * pc.x() / (z * z),
      0.0, cam.fy / z, -cam.fy * pc.y() / (z * z);
  return j_cam * cam.world_to_camera.rotation.matrix();
}

LossValueGrad silhouette_from_render(const std::vector<Splat>& posed_dynamic,
                                     const std::vector<Vec3>& dyn_canonical,
                                     const IncrementFrame& frame,
                                     const PinholeCamera& cam,
                                     const Mask& mask,
                                     const AlphaImage* static_alpha,
                                     double beta, const RenderConfig& rc) {
  LossValueGrad out;
  AlphaImage alpha = render_silhouette(posed_dynamic, cam, rc);
  if (static_alpha) alpha = composite_alpha(alpha, *static_alpha);
  const double inv_n = 1.0 / double(alpha.size());
  AlphaImage residual(alpha.width, alpha.height, 0.0);
  for (size_t i = 0; i < alpha.data.size(); ++i) {
    const double diff = alpha.data[i] - double(mask.data[i]);
    out.value += beta * diff * diff * inv_n;
    residual.data[i] = 2.0 * beta * diff * inv_n;
  }
  const std::vector<Vec3> mean_grads =
      static_alpha ? silhouette_backward_scaled(posed_dynamic, cam, residual,
                                                *static_alpha, rc)
                   : silhouette_backward(posed_dynamic, cam, residual, rc);
  for (size_t j = 0; j < posed_dynamic.size(); ++j) {
    frame.accumulate(dyn_canonical[j], mean_grads[j], &out.grad);
  }
  return out;
}

}  // namespace

std::vector<Splat> deform_object(const std::vector<Splat>& splats,
                                 const RigidTransform& transform) {
  std::vector<Splat> posed = splats;
  for (Splat& s : posed) {
    // Convex blend with binary weights: w^d T mu + w^s mu.
    s.mean = s.part_weight_dynamic * transform.apply(s.mean) +
             s.part_weight_static() * s.mean;
  }
  return posed;
}

LossValueGrad loss_silhouette(const std::vector<Splat>& canonical_splats,
                              const IncrementFrame& frame,
                              const PinholeCamera& cam, const Mask& mask,
                              double beta, const RenderConfig& rc) {
  // Split into static alpha + posed dynamic; exact because accumulated
  // alpha factors over disjoint splat sets.
  std::vector<Splat> statics, dynamics;
  std::vector<Vec3> dyn_canonical;
  for (const Splat& s : canonical_splats) {
    if (s.part_weight_dynamic > 0.5) {
      dyn_canonical.push_back(s.mean);
      Splat d = s;
      d.mean = frame.pose_point(s.mean);
      dynamics.push_back(d);
    } else {
      statics.push_back(s);
    }
  }
  const AlphaImage static_alpha = render_silhouette(statics, cam, rc);
  return silhouette_from_render(dynamics, dyn_canonical, frame, cam, mask,
                                &static_alpha, beta, rc);
}

LossValueGrad loss_silhouette_split(const std::vector<Splat>& dynamic_splats,
                                    const std::vector<Vec3>& dynamic_canonical,
                                    const IncrementFrame& frame,
                                    const PinholeCamera& cam, const Mask& mask,
                                    const AlphaImage& static_alpha,
                                    double beta, const RenderConfig& rc) {
  std::vector<Splat> posed = dynamic_splats;
  for (size_t j = 0; j < posed.size(); ++j) {
    posed[j].mean = frame.pose_point(dynamic_canonical[j]);
  }
  return silhouette_from_render(posed, dynamic_canonical, frame, cam, mask,
                                &static_alpha, beta, rc);
}

LossValueGrad loss_articulation(const std::vector<Splat>& canonical_splats,
                                const BindingSet& bindings,
                                const IncrementFrame& frame) {
  LossValueGrad out;
  for (const BindingPair& pair : bindings.pairs) {
    const Vec3 mu_d = canonical_splats[size_t(pair.dynamic_index)].mean;
    const Vec3 q_d = frame.pose_point(mu_d);
    const Vec3 p_s = canonical_splats[size_t(pair.static_index)].mean;
    const Vec3 diff = q_d - p_s;
    const double d = diff.norm();
    const double dev = d - pair.canonical_distance;
    out.value += dev * dev;
    if (d > 1e-12) {
      const Vec3 g = (2.0 * dev / d) * diff;
      frame.accumulate(mu_d, g, &out.grad);
    }
  }
  return out;
}

LossValueGrad loss_tracking(const std::vector<Splat>& canonical_splats,
                            const InfluenceTable& influences,
                            const TrackTargets& targets,
                            const IncrementFrame& frame,
                            const PinholeCamera& cam) {
  LossValueGrad out;
  for (size_t i = 0; i < influences.size(); ++i) {
    if (!targets[i].has_value()) continue;
    Vec2 predicted = Vec2::Zero();
    bool ok = true;
    for (const InfluenceEntry& e : influences[i]) {
      const Vec3 q = frame.pose_point(canonical_splats[size_t(e.splat)].mean);
      const ProjectedPoint p = project(cam, q);
      if (!p.valid) {
        ok = false;
        break;
      }
      predicted += e.weight * p.pixel;
    }
    if (!ok) continue;
    const Vec2 r = predicted - *targets[i];
    out.value += r.squaredNorm();
    for (const InfluenceEntry& e : influences[i]) {
      const Vec3 mu = canonical_splats[size_t(e.splat)].mean;
      const Vec3 q = frame.pose_point(mu);
      const Vec3 g =
          projection_jacobian(cam, q).transpose() * (2.0 * e.weight * r);
      frame.accumulate(mu, g, &out.grad);
    }
  }
  return out;
}

LossValueGrad loss_smoothness_se3(const std::optional<RigidTransform>& prev2,
                                  const std::optional<RigidTransform>& prev1,
                                  const IncrementFrame& frame) {
  LossValueGrad out;
  if (!prev1.has_value()) return out;  // first frame

  const Mat3 a = prev1->rotation.matrix().transpose();
  const Mat3 b = frame.anchor.rotation.matrix();
  const Vec3 w = frame.xi.head<3>();

  const Mat3 rel_rot = a * frame.T.rotation.matrix();
  const Vec3 rho = so3_log(Rotation(Eigen::Quaterniond(rel_rot)));
  const Vec3 tau = a * (frame.T.translation - prev1->translation);

  Vec6 r1;
  r1.head<3>() = rho;
  r1.tail<3>() = tau;
  const Vec6 r0 = prev2.has_value()
                      ? transform_log(prev2->inverse().compose(*prev1))
                      : Vec6::Zero();
  const Vec6 d = r1 - r0;
  out.value = d.squaredNorm();

  const Mat3 drho_dw =
      so3_right_jacobian_inv(rho) * b.transpose() * frame.jr;
  const Mat3 dtau_dw =
      -a * frame.rot_inc * skew(frame.anchor.translation) * frame.jr;
  out.grad.head<3>() = 2.0 * (drho_dw.transpose() * d.head<3>() +
                              dtau_dw.transpose() * d.tail<3>());
  out.grad.tail<3>() = 2.0 * (a.transpose() * d.tail<3>());
  return out;
}

InfluenceTable build_influence_table(const std::vector<Splat>& splats,
                                     const std::vector<uint8_t>& eligible,
                                     const PinholeCamera& cam,
                                     const std::vector<Vec2>& pixels, int K) {
  InfluenceTable table(pixels.size());
  // Projected eligible splats (brute-force K-nearest per pixel; particle
  // counts are small).
  std::vector<int> idx;
  std::vector<Vec2> proj_px;
  std::vector<double> depth, rho;
  for (size_t i = 0; i < splats.size(); ++i) {
    if (!eligible[i]) continue;
    const ProjectedPoint p = project(cam, splats[i].mean);
    if (!p.valid) continue;
    idx.push_back(int(i));
    proj_px.push_back(p.pixel);
    depth.push_back(p.depth);
    rho.push_back(std::max(splats[i].radius * cam.fx / p.depth, 0.3));
  }
  for (size_t pi = 0; pi < pixels.size(); ++pi) {
    std::vector<std::pair<double, int>> cand(idx.size());
    for (size_t c = 0; c < idx.size(); ++c) {
      cand[c] = {(proj_px[c] - pixels[pi]).squaredNorm(), int(c)};
    }
    const int take = std::min<int>(K, int(cand.size()));
    std::partial_sort(cand.begin(), cand.begin() + take, cand.end());
    cand.resize(size_t(take));
    // Transmittance needs depth order.
    std::sort(cand.begin(), cand.end(), [&](const auto& x, const auto& y) {
      if (depth[size_t(x.second)] != depth[size_t(y.second)])
        return depth[size_t(x.second)] < depth[size_t(y.second)];
      return x.second < y.second;
    });
    double transmittance = 1.0;
    double total = 0.0;
    std::vector<InfluenceEntry> row;
    for (const auto& [d2, c] : cand) {
      const double r = rho[size_t(c)];
      const double alpha =
          splats[size_t(idx[size_t(c)])].opacity * std::exp(-d2 / (2.0 * r * r));
      const double w = alpha * transmittance;
      transmittance *= 1.0 - alpha;
      row.push_back({idx[size_t(c)], w});
      total += w;
    }
    if (total < 1e-12) {
      // Degenerate: all mass on the nearest splat.
      if (!row.empty()) {
        row.resize(1);
        row[0].weight = 1.0;
        total = 1.0;
      }
    }
    for (InfluenceEntry& e : row) e.weight /= total;
    std::sort(row.begin(), row.end(),
              [](const InfluenceEntry& x, const InfluenceEntry& y) {
                return x.splat < y.splat;
              });
    table[pi] = std::move(row);
  }
  return table;
}

Stage1Problem make_stage1_problem(const ObservationBundle& bundle,
                                  const SegmentationResult& seg,
                                  const Stage1Config& config) {
  Stage1Problem prob;
  prob.cam = bundle.camera;
  prob.config = config;
  prob.bindings = seg.bindings;
  prob.splats = bundle.splats_canonical;

  std::vector<Splat> statics;
  for (size_t i = 0; i < prob.splats.size(); ++i) {
    prob.splats[i].part_weight_dynamic =
        seg.assignment.dynamic[i] ? 1.0 : 0.0;
    if (seg.assignment.dynamic[i]) {
      prob.dyn_canonical.push_back(prob.splats[i].mean);
      prob.dyn_splats.push_back(prob.splats[i]);
    } else {
      statics.push_back(prob.splats[i]);
    }
  }
  prob.static_alpha = render_silhouette(statics, prob.cam, config.render);

  std::vector<Vec2> pixels;
  for (size_t p = 0; p < seg.motion.label.size(); ++p) {
    if (seg.motion.label[p] == MotionLabel::Dynamic) {
      prob.particles.push_back(int(p));
      pixels.push_back(bundle.tracks.pixel(int(p), seg.motion.t_src));
    }
  }
  prob.influences = build_influence_table(
      prob.splats, seg.assignment.dynamic, prob.cam, pixels, 8);
  return prob;
}

RigidTransform optimize_frame(const Stage1Problem& problem, const Mask& mask,
                              const TrackTargets& targets,
                              const std::optional<RigidTransform>& prev2,
                              const std::optional<RigidTransform>& prev1,
                              const RigidTransform& warm_start,
                              int frame_index, FrameLossBreakdown* breakdown) {
  const Stage1Config& cfg = problem.config;
  RigidTransform anchor = warm_start;
  Vec6 xi = Vec6::Zero();
  AdamState adam(6);
  Eigen::VectorXd params = Eigen::VectorXd::Zero(6);

  double best_total = std::numeric_limits<double>::infinity();
  double sig_best = best_total;
  int last_sig_iter = 0;
  RigidTransform best_T = warm_start;
  FrameLossBreakdown best_bd;

  auto evaluate = [&](const IncrementFrame& fr, Vec6* grad,
                      FrameLossBreakdown* bd) {
    const LossValueGrad sil = loss_silhouette_split(
        problem.dyn_splats, problem.dyn_canonical, fr, problem.cam, mask,
        problem.static_alpha, cfg.beta_silhouette, cfg.render);
    const LossValueGrad art =
        loss_articulation(problem.splats, problem.bindings, fr);
    const LossValueGrad trk = loss_tracking(problem.splats, problem.influences,
                                            targets, fr, problem.cam);
    const LossValueGrad smo = loss_smoothness_se3(prev2, prev1, fr);
    const struct {
      const char* name;
      double v;
    } terms[] = {{"silhouette", sil.value},
                 {"articulation", art.value},
                 {"tracking", trk.value},
                 {"smoothness", smo.value}};
    for (const auto& t : terms) {
      if (!std::isfinite(t.v)) {
        throw Stage1Error("frame " + std::to_string(frame_index) +
                          ": non-finite " + t.name + " loss");
      }
    }
    bd->silhouette = sil.value;
    bd->articulation = art.value;
    bd->tracking = trk.value;
    bd->smoothness = smo.value;
    bd->total = cfg.lambda_r * sil.value + cfg.lambda_a * art.value +
                cfg.lambda_tr * trk.value + cfg.lambda_s * smo.value;
    if (grad) {
      *grad = cfg.lambda_r * sil.grad + cfg.lambda_a * art.grad +
              cfg.lambda_tr * trk.grad + cfg.lambda_s * smo.grad;
    }
  };

  int iters_run = 0;
  for (int iter = 0; iter < cfg.iters_per_frame; ++iter) {
    const IncrementFrame fr(anchor, xi);
    Vec6 grad;
    FrameLossBreakdown bd;
    evaluate(fr, &grad, &bd);
    iters_run = iter + 1;

    if (bd.total < best_total) {
      best_total = bd.total;
      best_T = fr.T;
      best_bd = bd;
    }
    if (bd.total < sig_best - cfg.early_stop_tol) {
      sig_best = bd.total;
      last_sig_iter = iter;
    } else if (iter - last_sig_iter >= cfg.early_stop_window) {
      break;
    }

    Eigen::VectorXd g(6);
    g << grad[0], grad[1], grad[2], grad[3], grad[4], grad[5];
    g = clip_grad_norm(g, cfg.grad_clip_norm);
    adam_step(adam, params, g, cfg.lr);
    xi = Vec6(params);

    if (cfg.reanchor_every > 0 && (iter + 1) % cfg.reanchor_every == 0) {
      anchor = transform_exp(xi).compose(anchor);
      xi.setZero();
      params.setZero();
    }
  }
  // Score the final iterate too.
  {
    const IncrementFrame fr(anchor, xi);
    FrameLossBreakdown bd;
    evaluate(fr, nullptr, &bd);
    if (bd.total < best_total) {
      best_total = bd.total;
      best_T = fr.T;
      best_bd = bd;
    }
  }
  best_bd.iterations = iters_run;
  if (breakdown) *breakdown = best_bd;
  return best_T;
}

ArticulationTrajectory run_stage1(const ObservationBundle& bundle,
                                  const SegmentationResult& seg,
                                  const Stage1Config& config) {
  const Stage1Problem problem = make_stage1_problem(bundle, seg, config);
  const int frames = bundle.frames;

  ArticulationTrajectory traj;
  traj.transforms.resize(size_t(frames));
  traj.losses.resize(size_t(frames));
  traj.transforms[0] = RigidTransform::identity();

  for (int t = 1; t < frames; ++t) {
    // Warm start: previous solution, extrapolated once two frames exist.
    RigidTransform warm = traj.transforms[size_t(t - 1)];
    if (t > 1) {
      const RigidTransform step = transform_exp(transform_log(
          traj.transforms[size_t(t - 2)].inverse().compose(
              traj.transforms[size_t(t - 1)])));
      warm = traj.transforms[size_t(t - 1)].compose(step);
    }
    TrackTargets targets(problem.particles.size());
    for (size_t i = 0; i < problem.particles.size(); ++i) {
      const int p = problem.particles[i];
      if (bundle.tracks.vis(p, t)) {
        targets[i] = bundle.tracks.pixel(p, t);
      }
    }
    const std::optional<RigidTransform> prev2 =
        t >= 2 ? std::optional<RigidTransform>(traj.transforms[size_t(t - 2)])
               : std::nullopt;
    try {
      traj.transforms[size_t(t)] = optimize_frame(
          problem, bundle.mask_object[size_t(t)], targets, prev2,
          traj.transforms[size_t(t - 1)], warm, t, &traj.losses[size_t(t)]);
    } catch (const Stage1Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Stage1Error("frame " + std::to_string(t) + ": " + e.what());
    }
  }
  return traj;
}

}  // namespace arthoi
