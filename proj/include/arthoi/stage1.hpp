// Stage I: per-frame recovery of the moving part's rigid transform by
// minimizing silhouette, binding-distance, point-track and smoothness terms
// with Adam on a 6-dof increment chart (left-multiplied rotation/translation
// increments, re-anchored periodically).

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "arthoi/bundle.hpp"
#include "arthoi/geometry.hpp"
#include "arthoi/segmentation.hpp"
#include "arthoi/splat.hpp"

namespace arthoi {

struct Stage1Config {
  double lambda_r = 1.0;
  double lambda_tr = 2.0;
  double lambda_a = 0.05;
  double lambda_s = 1.0;
  double beta_silhouette = 1.0;
  double lr = 1e-4;
  int iters_per_frame = 200;
  double early_stop_tol = 1e-7;
  int early_stop_window = 20;
  double grad_clip_norm = 1.0;
  int reanchor_every = 50;
  RenderConfig render;
};

struct FrameLossBreakdown {
  double total = 0.0;
  double silhouette = 0.0;
  double articulation = 0.0;
  double tracking = 0.0;
  double smoothness = 0.0;
  int iterations = 0;
};

struct ArticulationTrajectory {
  std::vector<RigidTransform> transforms;
  std::vector<FrameLossBreakdown> losses;
};

struct Stage1Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Increment chart around an anchor transform: T(xi) = (exp(w), v) * anchor.
/// Caches the terms needed to pull point gradients back to xi.
struct IncrementFrame {
  RigidTransform anchor;
  Vec6 xi;
  RigidTransform T;
  Mat3 rot_inc;  // exp(w)
  Mat3 jr;       // right Jacobian at w

  IncrementFrame(const RigidTransform& anchor_in, const Vec6& xi_in)
      : anchor(anchor_in), xi(xi_in) {
    const RigidTransform inc = transform_exp(xi);
    T = inc.compose(anchor);
    rot_inc = inc.rotation.matrix();
    jr = so3_right_jacobian(xi.head<3>());
  }

  Vec3 pose_point(const Vec3& canonical) const { return T.apply(canonical); }

  /// Adds (dq/dxi)^T * g for q = pose_point(canonical).
  void accumulate(const Vec3& canonical, const Vec3& g, Vec6* grad) const {
    const Vec3 p0 = anchor.apply(canonical);
    grad->head<3>() += jr.transpose() * p0.cross(rot_inc.transpose() * g);
    grad->tail<3>() += g;
  }
};

struct LossValueGrad {
  double value = 0.0;
  Vec6 grad = Vec6::Zero();
};

/// Posed splat means under the articulation blend: dynamic splats follow the
/// transform, static splats stay canonical.
std::vector<Splat> deform_object(const std::vector<Splat>& splats,
                                 const RigidTransform& transform);

/// beta * MSE(rendered silhouette of the posed splats, mask), with the
/// gradient chained through the renderer and the increment chart. Splats
/// carry part weights; only dynamic splats feel the transform.
LossValueGrad loss_silhouette(const std::vector<Splat>& canonical_splats,
                              const IncrementFrame& frame,
                              const PinholeCamera& cam, const Mask& mask,
                              double beta, const RenderConfig& rc);

/// Faster equivalent for the optimizer loop: dynamic splats rendered over a
/// precomputed static alpha image.
LossValueGrad loss_silhouette_split(const std::vector<Splat>& dynamic_splats,
                                    const std::vector<Vec3>& dynamic_canonical,
                                    const IncrementFrame& frame,
                                    const PinholeCamera& cam, const Mask& mask,
                                    const AlphaImage& static_alpha,
                                    double beta, const RenderConfig& rc);

/// Sum of squared deviations of binding-pair distances from canonical.
LossValueGrad loss_articulation(const std::vector<Splat>& canonical_splats,
                                const BindingSet& bindings,
                                const IncrementFrame& frame);

/// Particle targets for one frame; unset entries are invisible particles.
using TrackTargets = std::vector<std::optional<Vec2>>;

/// Influence-weighted reprojection error of dynamic particles. Table rows
/// hold (bundle splat index, weight) with weights summing to one.
struct InfluenceEntry {
  int splat;
  double weight;
};
using InfluenceTable = std::vector<std::vector<InfluenceEntry>>;

LossValueGrad loss_tracking(const std::vector<Splat>& canonical_splats,
                            const InfluenceTable& influences,
                            const TrackTargets& targets,
                            const IncrementFrame& frame,
                            const PinholeCamera& cam);

/// Squared second difference of relative-transform logs over the window
/// (T(t-2), T(t-1), current); first difference at t = 1, zero at t = 0.
LossValueGrad loss_smoothness_se3(const std::optional<RigidTransform>& prev2,
                                  const std::optional<RigidTransform>& prev1,
                                  const IncrementFrame& frame);

/// Normalized K-nearest influence rows for particle pixels at the source
/// frame, over splats flagged eligible.
InfluenceTable build_influence_table(const std::vector<Splat>& splats,
                                     const std::vector<uint8_t>& eligible,
                                     const PinholeCamera& cam,
                                     const std::vector<Vec2>& pixels, int K);

/// Everything frame-independent, assembled once per run.
struct Stage1Problem {
  PinholeCamera cam;
  std::vector<Splat> splats;        // canonical, part weights assigned
  std::vector<Vec3> dyn_canonical;  // canonical means of dynamic splats
  std::vector<Splat> dyn_splats;    // dynamic splats (canonical means)
  AlphaImage static_alpha;          // static splats rendered once
  BindingSet bindings;
  std::vector<int> particles;       // dynamic particle -> track point index
  InfluenceTable influences;        // aligned with `particles`
  Stage1Config config;
};

Stage1Problem make_stage1_problem(const ObservationBundle& bundle,
                                  const SegmentationResult& seg,
                                  const Stage1Config& config);

/// Optimizes one frame from a warm-start transform. `prev1`/`prev2` feed the
/// smoothness window; `mask`/`targets` are that frame's observations.
RigidTransform optimize_frame(const Stage1Problem& problem, const Mask& mask,
                              const TrackTargets& targets,
                              const std::optional<RigidTransform>& prev2,
                              const std::optional<RigidTransform>& prev1,
                              const RigidTransform& warm_start, int frame_index,
                              FrameLossBreakdown* breakdown);

/// Sequential per-frame solve (frame 0 pinned to identity).
ArticulationTrajectory run_stage1(const ObservationBundle& bundle,
                                  const SegmentationResult& seg,
                                  const Stage1Config& config);

}  // namespace arthoi
