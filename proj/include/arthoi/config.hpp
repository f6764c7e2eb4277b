// Flat run configuration: every tunable across the pipeline lives here as a
// registered field, so config files, --set overrides and CLI flags all map
// one-to-one onto struct members and unknown keys fail fast.

#pragma once

#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace arthoi {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // simulator
  std::string scene_template = "hinged-door";
  int frames = 60;
  double fps = 30.0;
  int image_width = 256;
  int image_height = 256;
  double fx = 200.0;
  double fy = 200.0;
  double panel_width = 0.6;
  double panel_height = 1.2;
  double border = 0.1;
  double box_depth = 0.6;
  double panel_gap = 0.02;
  double hinge_margin = 0.02;
  double knob_offset = 0.05;
  double splat_density = 400.0;
  double splat_radius = 0.03;
  double splat_opacity = 0.9;
  double travel_deg = 45.0;     // hinge opening angle
  double travel_m = 0.25;       // drawer slide distance
  int n_track_points = 400;
  double sigma_track = 0.5;
  double sigma_pose = 0.05;
  double sigma_root = 0.02;
  int seed = 1234;

  // segmentation
  double tau_dynamic = 5.0;
  double tau_static = 2.0;
  int min_frame_gap = 15;
  int kmeans_k = 4;
  int influence_k = 8;
  int graph_knn = 8;
  double qs_percentile = 10.0;
  double qs_min_px = 1.0;
  double binding_radius = 0.05;

  // stage 1
  double lambda_r = 1.0;
  double lambda_tr = 2.0;
  double lambda_a = 0.05;
  double lambda_s1 = 1.0;
  double beta_o = 1.0;
  double lr_stage1 = 1e-4;
  int iters_per_frame = 200;
  double early_stop_tol = 1e-7;
  int early_stop_window = 20;
  int reanchor_every = 50;

  // stage 2
  double lr_pose = 1e-3;
  double lr_root = 1e-4;
  double lambda_s2 = 1e4;
  double lambda_k = 1e4;
  double lambda_p = 1.0;
  double lambda_fs = 10.0;
  double lambda_c = 1e5;
  double beta_h = 1.0;
  int iters_stage2 = 1000;
  double eta = 0.5;
  double delta = 0.005;
  double conf_thresh = 0.5;
  double contact_rot_thresh_deg = 0.5;
  double contact_trans_thresh = 0.002;
  int contact_window = 5;
  double lift_offset = 0.005;
  int lift_k = 8;
  int n_object_samples = 500;
  int silhouette_scale = 4;

  // shared optimization / rendering
  double grad_clip_norm = 1.0;
  double alpha_threshold = 0.5;
  double depth_vis_threshold = 0.05;
  double truncation_sigmas = 3.0;

  // metrics
  double contact_threshold = 0.02;
  double penetration_eps = 0.001;
  double ground_contact_dist = 0.02;
  double slide_threshold = 0.001;
};

struct ConfigField {
  enum class Type { Double, Int, String };
  std::string name;
  Type type;
  size_t offset;
  std::string description;
};

/// Registry of every RunConfig field, in declaration order.
const std::vector<ConfigField>& config_fields();

/// Defaults, overridden by the JSON object; unknown keys are rejected.
RunConfig load_config(const nlohmann::json& j);
RunConfig load_config_file(const std::string& path);

/// Applies one "key=value" override.
void apply_override(RunConfig* cfg, const std::string& assignment);

nlohmann::ordered_json config_to_json(const RunConfig& cfg);

/// FNV-1a hash of the serialized config, hex-encoded.
std::string config_hash(const RunConfig& cfg);

}  // namespace arthoi
