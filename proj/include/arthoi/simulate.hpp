// Observation synthesis: oracle point tracks, per-frame masks and a scripted
// reach-grasp-pull body motion, assembled into a ground-truth-instrumented
// ObservationBundle.

#pragma once

#include <optional>

#include "arthoi/bundle.hpp"
#include "arthoi/scene.hpp"

namespace arthoi {

struct SimulationParams {
  int image_width = 256;
  int image_height = 256;
  double fx = 200.0;
  double fy = 200.0;
  int n_track_points = 400;
  double sigma_track = 0.5;  // px
  double sigma_pose = 0.05;  // rad
  double sigma_root = 0.02;  // m
  double fps = 30.0;
  double body_opacity = 0.9;
  RenderConfig render;
};

struct BodyMotion {
  BodyParams body_true;
  BodyParams body_init;
  std::vector<std::array<uint8_t, 2>> foot_contact_flags;
  std::vector<int> contact_frames;
};

/// Scripted interaction: the right wrist reaches for the handle, tracks it
/// exactly through the opening interval, then holds. Feet never move.
/// body_init is body_true plus per-frame iid pose/root noise.
BodyMotion synthesize_body_motion(const ArticulatedScene& scene,
                                  double sigma_pose, double sigma_root,
                                  uint64_t seed);

/// Oracle tracks for `splats` (bundle order, labels mark dynamic splats).
/// Points are sampled uniformly over splats visible at frame 0; visibility
/// per frame accounts for the image bounds and the occluder depth maps.
TrackSet synthesize_tracks(const std::vector<Splat>& splats,
                           const std::vector<uint8_t>& dynamic_labels,
                           const ArticulatedScene& scene,
                           const PinholeCamera& cam, int n_points,
                           double noise_sigma_px, uint64_t seed,
                           const std::vector<DepthImage>* occluders = nullptr,
                           const RenderConfig& cfg = RenderConfig());

/// Convenience overload sampling straight from the scene's own splats.
TrackSet synthesize_tracks(const ArticulatedScene& scene,
                           const PinholeCamera& cam, int n_points,
                           double noise_sigma_px, uint64_t seed);

struct FrameMasks {
  Mask object;
  Mask human;
  Mask object_sam;
};

/// M_object: amodal object silhouette at t. M_human: body silhouette.
/// M_object_sam: M_object minus pixels where the body is strictly nearer.
FrameMasks synthesize_masks(const ArticulatedScene& scene,
                            const FkFrame& body_frame,
                            const PinholeCamera& cam, int t,
                            double body_opacity = 0.9,
                            const RenderConfig& cfg = RenderConfig());

/// Full bundle + ground truth for a scene descriptor.
void simulate_bundle(const SceneDescriptor& desc, const SimulationParams& sim,
                     ObservationBundle* bundle, GroundTruth* gt);

/// Object splats posed at frame t (dynamic transformed, static unchanged).
std::vector<Splat> posed_object_splats(const ArticulatedScene& scene, int t);

}  // namespace arthoi
