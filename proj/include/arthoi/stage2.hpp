// Stage II: derive 3D contact keypoints from the Stage I scaffold, then
// jointly refine body parameters over all frames under silhouette, contact,
// prior, foot-sliding, smoothness and collision terms.

#pragma once

#include <optional>
#include <vector>

#include "arthoi/body.hpp"
#include "arthoi/bundle.hpp"
#include "arthoi/geometry.hpp"
#include "arthoi/splat.hpp"

namespace arthoi {

struct Stage2Config {
  double lr_pose = 1e-3;
  double lr_root = 1e-4;
  double lambda_s = 1e4;
  double lambda_k = 1e4;
  double lambda_p = 1.0;
  double lambda_fs = 10.0;
  double lambda_c = 1e5;
  double beta_h = 1.0;            // human silhouette weight
  int iters = 1000;
  double eta = 0.5;               // pose-prior weight
  double delta = 0.005;           // collision threshold, m
  double conf_thresh = 0.5;
  double contact_rot_thresh_deg = 0.5;   // per frame
  double contact_trans_thresh = 0.002;   // m per frame
  int contact_window = 5;
  double lift_offset = 0.005;     // m toward the camera
  int lift_k = 8;
  int n_object_samples = 500;
  int silhouette_scale = 4;       // render the body term at 1/scale size
  double grad_clip_norm = 1.0;
  RenderConfig render;
};

struct ContactEvent {
  int frame;
  int joint;
  Vec3 target;
  int source_splat;  // bundle index of the lifted splat
};

struct Stage2Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Frames where the articulation moves faster than the thresholds, dilated
/// (max-pooled) by the window.
std::vector<int> detect_contact_frames(
    const std::vector<RigidTransform>& trajectory, double rot_thresh_deg,
    double trans_thresh, int window);

/// Pixelwise M_human AND rendered_silhouette AND NOT M_object_sam.
Mask contact_region(const Mask& m_human, const Mask& rendered_silhouette,
                    const Mask& m_object_sam);

/// Hand joints (wrists) whose projected pixel falls in the region and whose
/// confidence clears the threshold.
std::vector<int> assign_joints(const Mask& region, const BodyParams& params,
                               int frame, const PinholeCamera& cam,
                               double conf_thresh,
                               const std::array<double, kNumJoints>& confidence);

/// Among the K dynamic splats nearest to the pixel, the minimum-depth one;
/// its mean is pulled `offset` toward the camera along the view ray.
/// `splat_indices` carries the bundle indices of `posed_dynamic`.
std::optional<ContactEvent> lift_contact(
    const Vec2& joint_pixel, const std::vector<Splat>& posed_dynamic,
    const std::vector<int>& splat_indices, const PinholeCamera& cam, int K,
    double offset);

/// Steps (1)-(4) over a whole bundle. The lift pixel is the centroid of the
/// contact-region component containing the joint's projection, which keeps
/// targets anchored to the observed contact evidence rather than the noisy
/// pose initialization.
std::vector<ContactEvent> derive_contacts(
    const ObservationBundle& bundle,
    const std::vector<RigidTransform>& trajectory,
    const std::vector<uint8_t>& dynamic_labels, const Stage2Config& cfg);

// ---- Losses. Parameters are laid out per frame as [16 x rotvec, root],
// with the shape scale as the final entry. Gradients accumulate into a
// vector of that layout.

struct Stage2LossTerms {
  double silhouette = 0.0;
  double kinematic = 0.0;
  double prior = 0.0;
  double footslide = 0.0;
  double smoothness = 0.0;
  double collision = 0.0;
  double total = 0.0;
};

constexpr int kFrameParamDim = kNumJoints * 3 + 3;

Eigen::VectorXd pack_params(const BodyParams& p);
BodyParams unpack_params(const Eigen::VectorXd& v, int frames);

double loss_kinematic(const BodyParams& params,
                      const std::vector<FkFrame>& fk_frames,
                      const std::vector<ContactEvent>& contacts,
                      Eigen::VectorXd* grad);

double loss_prior(const BodyParams& params, const BodyParams& init,
                  double eta, Eigen::VectorXd* grad);

double loss_footslide(const BodyParams& params,
                      const std::vector<FkFrame>& fk_frames,
                      const std::vector<std::array<uint8_t, 2>>& foot_flags,
                      Eigen::VectorXd* grad);

double loss_collision(const BodyParams& params,
                      const std::vector<FkFrame>& fk_frames,
                      const std::vector<std::vector<Vec3>>& object_samples,
                      double delta, Eigen::VectorXd* grad);

double loss_smoothness_body(const BodyParams& params, Eigen::VectorXd* grad);

double loss_silhouette_human(const BodyParams& params,
                             const std::vector<FkFrame>& fk_frames,
                             const std::vector<Mask>& masks,
                             const PinholeCamera& cam, double beta_h,
                             int scale, const RenderConfig& rc,
                             Eigen::VectorXd* grad);

/// Farthest-point subsample of the dynamic splats (canonical pose).
std::vector<Vec3> sample_object_points(const std::vector<Splat>& splats,
                                       const std::vector<uint8_t>& dynamic_labels,
                                       int n);

struct Stage2Result {
  BodyParams refined;
  std::vector<ContactEvent> contacts;
  std::vector<Stage2LossTerms> loss_log;  // one row per iteration
  Stage2LossTerms best;
  int best_iter = 0;
};

Stage2Result run_stage2(const ObservationBundle& bundle,
                        const std::vector<RigidTransform>& trajectory,
                        const std::vector<uint8_t>& dynamic_labels,
                        const Stage2Config& cfg);

/// Camera and mask downsampled by an integer factor (strided center sample).
PinholeCamera scale_camera(const PinholeCamera& cam, int scale);
Mask downsample_mask(const Mask& mask, int scale);

}  // namespace arthoi
