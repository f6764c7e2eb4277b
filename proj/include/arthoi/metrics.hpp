// Interaction and articulation metrics: rotation-error statistics against
// ground truth, contact and penetration percentages, foot sliding and motion
// smoothness. Conventions: population standard deviation, degrees for
// angles, 30 FPS joint speeds.

#pragma once

#include <vector>

#include "arthoi/body.hpp"
#include "arthoi/geometry.hpp"
#include "arthoi/scene.hpp"
#include "arthoi/splat.hpp"

#include "json.hpp"

namespace arthoi {

struct MetricsConfig {
  double contact_threshold = 0.02;    // m, wrist-to-object
  double penetration_eps = 0.001;     // m
  double ground_height = 0.0;         // m, z of the ground plane
  double ground_contact_dist = 0.02;  // m, foot height counted as contact
  double slide_threshold = 0.001;     // m per frame
  double fps = 30.0;
};

struct RotationStats {
  double mean = 0.0;
  double stddev = 0.0;
  double max = 0.0;
  double min = 0.0;
  double median = 0.0;
};

struct MetricReport {
  RotationStats rotation;
  double contact_pct = 0.0;
  double penetration_pct = 0.0;
  double foot_sliding = 0.0;
  double smoothness = 0.0;
};

/// Per-frame geodesic angles between estimated and ground-truth rotations,
/// aggregated over frames. Throws on length mismatch.
RotationStats rotation_errors(const std::vector<RigidTransform>& est,
                              const std::vector<RigidTransform>& gt);

/// Percentage of frames where either wrist is within threshold of some
/// object point. `object_points[t]` are the posed object points at frame t.
double contact_percentage(const BodyParams& params,
                          const std::vector<std::vector<Vec3>>& object_points,
                          double threshold_m);

/// Percentage of body-vertex frames whose signed distance to the nearest
/// object surface point, (v - q) . n_q, falls below -eps.
double penetration_percentage(
    const BodyParams& params,
    const std::vector<SurfaceSamples>& posed_surface, double eps);

/// Ratio of sliding foot-joint transitions to contact transitions times the
/// mean horizontal slide distance. Foot joints: both ankles and toes.
double foot_sliding(const BodyParams& params, double ground_height,
                    double contact_dist, double slide_thresh = 0.001);

/// Population standard deviation of per-joint speeds across transitions.
double motion_smoothness(const BodyParams& params, double fps = 30.0);

nlohmann::ordered_json report_to_json(const MetricReport& report);

/// Surface samples posed by the per-frame transform (dynamic samples only;
/// static ones stay put).
std::vector<SurfaceSamples> pose_surface_samples(
    const SurfaceSamples& canonical,
    const std::vector<RigidTransform>& transforms);

}  // namespace arthoi
