// Flow-based part segmentation: classify tracked points by displacement
// magnitude, cluster prompts, form a dense dynamic mask, back-project pixel
// labels onto splats, refine by 3D connectivity, extract quasi-static points
// and build the dynamic-static binding set.

#pragma once

#include <utility>
#include <vector>

#include "arthoi/bundle.hpp"
#include "arthoi/geometry.hpp"
#include "arthoi/splat.hpp"

namespace arthoi {

enum class MotionLabel : uint8_t { Dynamic = 0, Static = 1, Ambiguous = 2 };

struct MotionLabelSet {
  std::vector<MotionLabel> label;      // per tracked point
  std::vector<double> magnitude;       // px, displacement between the frames
  int t_src = 0;
  int t_tgt = 0;
};

struct PartAssignment {
  std::vector<uint8_t> dynamic;  // per splat, 1 = dynamic
  std::vector<double> s_dyn;
  std::vector<double> s_static;
};

struct BindingPair {
  int dynamic_index;
  int static_index;
  double canonical_distance;  // m, at frame 0
};

struct BindingSet {
  std::vector<BindingPair> pairs;
  bool empty_warning = false;  // set when no pair qualified
};

struct SegmentationConfig {
  double tau_dynamic = 5.0;   // px
  double tau_static = 2.0;    // px
  int min_frame_gap = 15;
  int kmeans_k = 4;           // prompt clusters per class
  int influence_k = 8;        // K nearest splats per pixel
  int graph_knn = 8;          // connectivity graph neighbors
  double qs_percentile = 10.0;
  double qs_min_px = 1.0;
  double binding_radius = 0.05;  // m
  uint64_t kmeans_seed = 7;
};

/// Frame pair maximizing the median displacement of commonly visible points
/// subject to t_tgt - t_src >= min_gap. Throws if the sequence is shorter
/// than min_gap + 1 frames.
std::pair<int, int> select_frame_pair(const TrackSet& tracks, int min_gap);

/// Thresholded displacement labels; points invisible at either frame are
/// ambiguous. Requires tau_dynamic > tau_static >= 0.
MotionLabelSet classify_tracks(const TrackSet& tracks, int t_src, int t_tgt,
                               double tau_dynamic, double tau_static);

/// k-means (k-means++ seeding, fixed seed, at most 100 iterations).
/// Degenerate input (fewer points than k) returns the points themselves.
std::vector<Vec2> cluster_prompts(const std::vector<Vec2>& points, int k,
                                  uint64_t seed = 7);

/// Nearest-prompt labeling inside the object mask; ties go static. With no
/// static prompts the whole object mask is dynamic. Throws when both prompt
/// sets are empty.
Mask dense_dynamic_mask(const Mask& object_mask,
                        const std::vector<Vec2>& dyn_prompts,
                        const std::vector<Vec2>& static_prompts);

/// Splatting-style back-projection of pixel labels onto splats: each labeled
/// pixel distributes influence onto its K nearest projected splats, weighted
/// by opacity, footprint falloff and depth-ordering transmittance. A splat
/// is dynamic iff s_dyn > s_static (ties static).
PartAssignment backproject_mask(const Mask& mask_dyn, const Mask& mask_static,
                                const std::vector<Splat>& splats,
                                const PinholeCamera& cam, int K);

/// Keeps the largest connected component per class on a symmetric k-NN
/// graph of 3D positions; everything else is reassigned to the class with
/// the nearer kept-component centroid.
PartAssignment refine_connectivity(const PartAssignment& assignment,
                                   const std::vector<Splat>& splats,
                                   int k_nn);

struct QuasiStaticSet {
  std::vector<int> point_indices;  // into the track set
  double threshold_px = 0.0;
};

/// Dynamic-labeled points whose displacement magnitude is at most
/// max(nearest-rank percentile of dynamic magnitudes, min_px).
QuasiStaticSet extract_quasi_static(const MotionLabelSet& labels,
                                    double percentile, double min_px);

/// Binding pairs: quasi-static points influence their K nearest dynamic
/// splats; each such splat is paired with its nearest static splat within
/// radius_r (3D). Pairs are deduplicated; canonical distances recorded.
BindingSet build_bindings(const QuasiStaticSet& qs, const TrackSet& tracks,
                          int t_src, const PartAssignment& assignment,
                          const std::vector<Splat>& splats,
                          const PinholeCamera& cam, double radius_r, int K);

struct SegmentationResult {
  MotionLabelSet motion;
  PartAssignment assignment;
  BindingSet bindings;
  std::vector<Vec2> dyn_prompts;
  std::vector<Vec2> static_prompts;
};

/// Whole pipeline over a bundle.
SegmentationResult run_segmentation(const ObservationBundle& bundle,
                                    const SegmentationConfig& cfg);

/// Nearest-rank percentile: the ceil(p/100 * n)-th order statistic.
double nearest_rank_percentile(std::vector<double> values, double percentile);

}  // namespace arthoi
