#include "arthoi/config.hpp"

#include <cstddef>
#include <fstream>

namespace arthoi {

namespace {

using Type = ConfigField::Type;

#define FIELD_D(NAME, DESC) \
  ConfigField{#NAME, Type::Double, offsetof(RunConfig, NAME), DESC}
#define FIELD_I(NAME, DESC) \
  ConfigField{#NAME, Type::Int, offsetof(RunConfig, NAME), DESC}
#define FIELD_S(NAME, DESC) \
  ConfigField{#NAME, Type::String, offsetof(RunConfig, NAME), DESC}

std::vector<ConfigField> build_registry() {
  return {
      FIELD_S(scene_template, "scene template: hinged-door or drawer"),
      FIELD_I(frames, "sequence length"),
      FIELD_D(fps, "frames per second"),
      FIELD_I(image_width, "image width, px"),
      FIELD_I(image_height, "image height, px"),
      FIELD_D(fx, "focal length x, px"),
      FIELD_D(fy, "focal length y, px"),
      FIELD_D(panel_width, "moving panel width, m"),
      FIELD_D(panel_height, "moving panel height, m"),
      FIELD_D(border, "face frame border, m"),
      FIELD_D(box_depth, "cabinet depth, m"),
      FIELD_D(panel_gap, "panel offset in front of the box, m"),
      FIELD_D(hinge_margin, "bare strip next to the hinge, m"),
      FIELD_D(knob_offset, "handle knob protrusion, m"),
      FIELD_D(splat_density, "splats per square meter"),
      FIELD_D(splat_radius, "splat radius, m"),
      FIELD_D(splat_opacity, "splat opacity"),
      FIELD_D(travel_deg, "hinge opening angle, deg"),
      FIELD_D(travel_m, "drawer slide distance, m"),
      FIELD_I(n_track_points, "tracked points"),
      FIELD_D(sigma_track, "track noise, px"),
      FIELD_D(sigma_pose, "init pose noise, rad"),
      FIELD_D(sigma_root, "init root noise, m"),
      FIELD_I(seed, "master seed"),
      FIELD_D(tau_dynamic, "dynamic flow threshold, px"),
      FIELD_D(tau_static, "static flow threshold, px"),
      FIELD_I(min_frame_gap, "min source-target frame gap"),
      FIELD_I(kmeans_k, "prompt clusters per class"),
      FIELD_I(influence_k, "K nearest splats per pixel"),
      FIELD_I(graph_knn, "connectivity graph neighbors"),
      FIELD_D(qs_percentile, "quasi-static percentile"),
      FIELD_D(qs_min_px, "quasi-static minimum threshold, px"),
      FIELD_D(binding_radius, "binding radius, m"),
      FIELD_D(lambda_r, "stage1 reconstruction weight"),
      FIELD_D(lambda_tr, "stage1 tracking weight"),
      FIELD_D(lambda_a, "stage1 articulation weight"),
      FIELD_D(lambda_s1, "stage1 smoothness weight"),
      FIELD_D(beta_o, "object silhouette weight"),
      FIELD_D(lr_stage1, "stage1 learning rate"),
      FIELD_I(iters_per_frame, "stage1 iterations per frame"),
      FIELD_D(early_stop_tol, "stage1 early-stop tolerance"),
      FIELD_I(early_stop_window, "stage1 early-stop window"),
      FIELD_I(reanchor_every, "stage1 re-anchor period"),
      FIELD_D(lr_pose, "stage2 pose learning rate"),
      FIELD_D(lr_root, "stage2 root learning rate"),
      FIELD_D(lambda_s2, "stage2 smoothness weight"),
      FIELD_D(lambda_k, "stage2 kinematic weight"),
      FIELD_D(lambda_p, "stage2 prior weight"),
      FIELD_D(lambda_fs, "stage2 foot sliding weight"),
      FIELD_D(lambda_c, "stage2 collision weight"),
      FIELD_D(beta_h, "human silhouette weight"),
      FIELD_I(iters_stage2, "stage2 iterations"),
      FIELD_D(eta, "pose prior weight"),
      FIELD_D(delta, "collision threshold, m"),
      FIELD_D(conf_thresh, "joint confidence threshold"),
      FIELD_D(contact_rot_thresh_deg, "contact rotation threshold, deg/frame"),
      FIELD_D(contact_trans_thresh, "contact translation threshold, m/frame"),
      FIELD_I(contact_window, "contact max-pool window, frames"),
      FIELD_D(lift_offset, "contact lift offset toward camera, m"),
      FIELD_I(lift_k, "K nearest dynamic splats for lifting"),
      FIELD_I(n_object_samples, "collision object samples"),
      FIELD_I(silhouette_scale, "stage2 silhouette downsample factor"),
      FIELD_D(grad_clip_norm, "gradient clipping max norm"),
      FIELD_D(alpha_threshold, "silhouette binarization threshold"),
      FIELD_D(depth_vis_threshold, "depth visibility threshold"),
      FIELD_D(truncation_sigmas, "footprint truncation, sigmas"),
      FIELD_D(contact_threshold, "contact metric threshold, m"),
      FIELD_D(penetration_eps, "penetration tolerance, m"),
      FIELD_D(ground_contact_dist, "foot contact height, m"),
      FIELD_D(slide_threshold, "foot sliding threshold, m/frame"),
  };
}

#undef FIELD_D
#undef FIELD_I
#undef FIELD_S

double* double_ptr(RunConfig* cfg, const ConfigField& f) {
  return reinterpret_cast<double*>(reinterpret_cast<char*>(cfg) + f.offset);
}
int* int_ptr(RunConfig* cfg, const ConfigField& f) {
  return reinterpret_cast<int*>(reinterpret_cast<char*>(cfg) + f.offset);
}
std::string* string_ptr(RunConfig* cfg, const ConfigField& f) {
  return reinterpret_cast<std::string*>(reinterpret_cast<char*>(cfg) +
                                        f.offset);
}

}  // namespace

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> registry = build_registry();
  return registry;
}

RunConfig load_config(const nlohmann::json& j) {
  RunConfig cfg;
  if (j.is_null()) return cfg;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const ConfigField* field = nullptr;
    for (const ConfigField& f : config_fields()) {
      if (f.name == key) {
        field = &f;
        break;
      }
    }
    if (!field) throw ConfigError("unknown config key: " + key);
    try {
      switch (field->type) {
        case ConfigField::Type::Double:
          *double_ptr(&cfg, *field) = value.get<double>();
          break;
        case ConfigField::Type::Int:
          *int_ptr(&cfg, *field) = value.get<int>();
          break;
        case ConfigField::Type::String:
          *string_ptr(&cfg, *field) = value.get<std::string>();
          break;
      }
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("bad value type for config key: " + key);
    }
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad JSON in config file " + path + ": " + e.what());
  }
  return load_config(j);
}

void apply_override(RunConfig* cfg, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must be key=value: " + assignment);
  }
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  for (const ConfigField& f : config_fields()) {
    if (f.name != key) continue;
    try {
      switch (f.type) {
        case ConfigField::Type::Double:
          *double_ptr(cfg, f) = std::stod(value);
          return;
        case ConfigField::Type::Int:
          *int_ptr(cfg, f) = std::stoi(value);
          return;
        case ConfigField::Type::String:
          *string_ptr(cfg, f) = value;
          return;
      }
    } catch (const std::exception&) {
      throw ConfigError("bad value for --set " + key + ": " + value);
    }
  }
  throw ConfigError("unknown config key: " + key);
}

nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  RunConfig* mut = const_cast<RunConfig*>(&cfg);
  for (const ConfigField& f : config_fields()) {
    switch (f.type) {
      case ConfigField::Type::Double:
        j[f.name] = *double_ptr(mut, f);
        break;
      case ConfigField::Type::Int:
        j[f.name] = *int_ptr(mut, f);
        break;
      case ConfigField::Type::String:
        j[f.name] = *string_ptr(mut, f);
        break;
    }
  }
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  const std::string s = config_to_json(cfg).dump();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
  return buf;
}

}  // namespace arthoi
