#include "arthoi/artifacts.hpp"

#include <filesystem>
#include <fstream>

namespace arthoi {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void require_file(const std::string& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw MissingArtifact(fs::path(path).filename().string() +
                          " missing; run " + producer);
  }
}

}  // namespace

void write_segmentation(const std::string& bundle_dir,
                        const SegmentationResult& seg) {
  ordered_json a;
  a["t_src"] = seg.motion.t_src;
  a["t_tgt"] = seg.motion.t_tgt;
  ordered_json track_labels = ordered_json::array();
  ordered_json track_mags = ordered_json::array();
  for (size_t i = 0; i < seg.motion.label.size(); ++i) {
    track_labels.push_back(int(seg.motion.label[i]));
    track_mags.push_back(seg.motion.magnitude[i]);
  }
  a["track_labels"] = track_labels;
  a["track_magnitudes"] = track_mags;
  ordered_json labels = ordered_json::array(), sd = ordered_json::array(),
               ss = ordered_json::array();
  for (size_t i = 0; i < seg.assignment.dynamic.size(); ++i) {
    labels.push_back(int(seg.assignment.dynamic[i]));
    sd.push_back(seg.assignment.s_dyn[i]);
    ss.push_back(seg.assignment.s_static[i]);
  }
  a["splat_labels"] = labels;
  a["s_dyn"] = sd;
  a["s_static"] = ss;
  write_json_file((fs::path(bundle_dir) / "assignment.json").string(), a);

  ordered_json b;
  ordered_json pairs = ordered_json::array();
  for (const BindingPair& p : seg.bindings.pairs) {
    pairs.push_back({p.dynamic_index, p.static_index, p.canonical_distance});
  }
  b["pairs"] = pairs;
  b["empty_warning"] = seg.bindings.empty_warning;
  write_json_file((fs::path(bundle_dir) / "bindings.json").string(), b);
}

SegmentationResult read_segmentation(const std::string& bundle_dir) {
  const std::string apath = (fs::path(bundle_dir) / "assignment.json").string();
  const std::string bpath = (fs::path(bundle_dir) / "bindings.json").string();
  require_file(apath, "segment");
  require_file(bpath, "segment");
  SegmentationResult seg;
  const json a = read_json_file(apath);
  seg.motion.t_src = a.at("t_src").get<int>();
  seg.motion.t_tgt = a.at("t_tgt").get<int>();
  for (const auto& v : a.at("track_labels")) {
    seg.motion.label.push_back(MotionLabel(v.get<int>()));
  }
  for (const auto& v : a.at("track_magnitudes")) {
    seg.motion.magnitude.push_back(v.get<double>());
  }
  for (const auto& v : a.at("splat_labels")) {
    seg.assignment.dynamic.push_back(uint8_t(v.get<int>()));
  }
  for (const auto& v : a.at("s_dyn")) {
    seg.assignment.s_dyn.push_back(v.get<double>());
  }
  for (const auto& v : a.at("s_static")) {
    seg.assignment.s_static.push_back(v.get<double>());
  }
  const json b = read_json_file(bpath);
  for (const auto& v : b.at("pairs")) {
    seg.bindings.pairs.push_back(
        {v[0].get<int>(), v[1].get<int>(), v[2].get<double>()});
  }
  seg.bindings.empty_warning = b.at("empty_warning").get<bool>();
  return seg;
}

void write_stage1(const std::string& bundle_dir,
                  const ArticulationTrajectory& traj) {
  ordered_json frames = ordered_json::array();
  for (size_t t = 0; t < traj.transforms.size(); ++t) {
    ordered_json f = transform_to_json(traj.transforms[t]);
    const FrameLossBreakdown& bd = traj.losses[t];
    f["losses"] = {{"total", bd.total},
                   {"silhouette", bd.silhouette},
                   {"articulation", bd.articulation},
                   {"tracking", bd.tracking},
                   {"smoothness", bd.smoothness}};
    f["iterations"] = bd.iterations;
    frames.push_back(f);
  }
  write_json_file((fs::path(bundle_dir) / "stage1_transforms.json").string(),
                  frames);
}

ArticulationTrajectory read_stage1(const std::string& bundle_dir) {
  const std::string path =
      (fs::path(bundle_dir) / "stage1_transforms.json").string();
  require_file(path, "stage1");
  ArticulationTrajectory traj;
  for (const auto& f : read_json_file(path)) {
    traj.transforms.push_back(transform_from_json(f));
    FrameLossBreakdown bd;
    if (f.contains("losses")) {
      bd.total = f["losses"].value("total", 0.0);
      bd.silhouette = f["losses"].value("silhouette", 0.0);
      bd.articulation = f["losses"].value("articulation", 0.0);
      bd.tracking = f["losses"].value("tracking", 0.0);
      bd.smoothness = f["losses"].value("smoothness", 0.0);
    }
    bd.iterations = f.value("iterations", 0);
    traj.losses.push_back(bd);
  }
  return traj;
}

void write_stage2(const std::string& bundle_dir, const Stage2Result& result) {
  write_json_file((fs::path(bundle_dir) / "stage2_body.json").string(),
                  body_params_to_json(result.refined));

  ordered_json contacts = ordered_json::array();
  for (const ContactEvent& c : result.contacts) {
    ordered_json e;
    e["frame"] = c.frame;
    e["joint"] = c.joint;
    e["joint_name"] = joint_name(c.joint);
    e["target"] = {c.target.x(), c.target.y(), c.target.z()};
    e["source_splat"] = c.source_splat;
    contacts.push_back(e);
  }
  write_json_file((fs::path(bundle_dir) / "contacts.json").string(), contacts);

  std::ofstream csv(fs::path(bundle_dir) / "loss_log.csv");
  csv << "iter,total,silhouette,kinematic,prior,footslide,smoothness,"
         "collision\n";
  for (size_t i = 0; i < result.loss_log.size(); ++i) {
    const Stage2LossTerms& t = result.loss_log[i];
    csv << i << ',' << t.total << ',' << t.silhouette << ',' << t.kinematic
        << ',' << t.prior << ',' << t.footslide << ',' << t.smoothness << ','
        << t.collision << '\n';
  }
}

BodyParams read_stage2_body(const std::string& bundle_dir) {
  const std::string path = (fs::path(bundle_dir) / "stage2_body.json").string();
  require_file(path, "stage2");
  return body_params_from_json(read_json_file(path));
}

SceneDescriptor scene_from_config(const RunConfig& cfg) {
  SceneDescriptor d;
  d.template_name = cfg.scene_template;
  d.frames = cfg.frames;
  d.panel_width = cfg.panel_width;
  d.panel_height = cfg.panel_height;
  d.border = cfg.border;
  d.box_depth = cfg.box_depth;
  d.panel_gap = cfg.panel_gap;
  d.hinge_margin = cfg.hinge_margin;
  d.knob_offset = cfg.knob_offset;
  d.splat_density = cfg.splat_density;
  d.splat_radius = cfg.splat_radius;
  d.splat_opacity = cfg.splat_opacity;
  d.travel = cfg.scene_template == "drawer" ? cfg.travel_m
                                            : cfg.travel_deg * M_PI / 180.0;
  d.seed = uint64_t(cfg.seed);
  return d;
}

SimulationParams sim_from_config(const RunConfig& cfg) {
  SimulationParams s;
  s.image_width = cfg.image_width;
  s.image_height = cfg.image_height;
  s.fx = cfg.fx;
  s.fy = cfg.fy;
  s.n_track_points = cfg.n_track_points;
  s.sigma_track = cfg.sigma_track;
  s.sigma_pose = cfg.sigma_pose;
  s.sigma_root = cfg.sigma_root;
  s.fps = cfg.fps;
  s.render = render_from_config(cfg);
  return s;
}

SegmentationConfig seg_from_config(const RunConfig& cfg) {
  SegmentationConfig s;
  s.tau_dynamic = cfg.tau_dynamic;
  s.tau_static = cfg.tau_static;
  s.min_frame_gap = cfg.min_frame_gap;
  s.kmeans_k = cfg.kmeans_k;
  s.influence_k = cfg.influence_k;
  s.graph_knn = cfg.graph_knn;
  s.qs_percentile = cfg.qs_percentile;
  s.qs_min_px = cfg.qs_min_px;
  s.binding_radius = cfg.binding_radius;
  return s;
}

Stage1Config stage1_from_config(const RunConfig& cfg) {
  Stage1Config s;
  s.lambda_r = cfg.lambda_r;
  s.lambda_tr = cfg.lambda_tr;
  s.lambda_a = cfg.lambda_a;
  s.lambda_s = cfg.lambda_s1;
  s.beta_silhouette = cfg.beta_o;
  s.lr = cfg.lr_stage1;
  s.iters_per_frame = cfg.iters_per_frame;
  s.early_stop_tol = cfg.early_stop_tol;
  s.early_stop_window = cfg.early_stop_window;
  s.grad_clip_norm = cfg.grad_clip_norm;
  s.reanchor_every = cfg.reanchor_every;
  s.render = render_from_config(cfg);
  return s;
}

Stage2Config stage2_from_config(const RunConfig& cfg) {
  Stage2Config s;
  s.lr_pose = cfg.lr_pose;
  s.lr_root = cfg.lr_root;
  s.lambda_s = cfg.lambda_s2;
  s.lambda_k = cfg.lambda_k;
  s.lambda_p = cfg.lambda_p;
  s.lambda_fs = cfg.lambda_fs;
  s.lambda_c = cfg.lambda_c;
  s.beta_h = cfg.beta_h;
  s.iters = cfg.iters_stage2;
  s.eta = cfg.eta;
  s.delta = cfg.delta;
  s.conf_thresh = cfg.conf_thresh;
  s.contact_rot_thresh_deg = cfg.contact_rot_thresh_deg;
  s.contact_trans_thresh = cfg.contact_trans_thresh;
  s.contact_window = cfg.contact_window;
  s.lift_offset = cfg.lift_offset;
  s.lift_k = cfg.lift_k;
  s.n_object_samples = cfg.n_object_samples;
  s.silhouette_scale = cfg.silhouette_scale;
  s.grad_clip_norm = cfg.grad_clip_norm;
  s.render = render_from_config(cfg);
  return s;
}

MetricsConfig metrics_from_config(const RunConfig& cfg) {
  MetricsConfig m;
  m.contact_threshold = cfg.contact_threshold;
  m.penetration_eps = cfg.penetration_eps;
  m.ground_contact_dist = cfg.ground_contact_dist;
  m.slide_threshold = cfg.slide_threshold;
  m.fps = cfg.fps;
  return m;
}

RenderConfig render_from_config(const RunConfig& cfg) {
  RenderConfig r;
  r.truncation_sigmas = cfg.truncation_sigmas;
  r.alpha_threshold = cfg.alpha_threshold;
  r.depth_vis_threshold = cfg.depth_vis_threshold;
  return r;
}

nlohmann::ordered_json evaluate_bundle(const std::string& bundle_dir,
                                       const RunConfig& cfg) {
  std::optional<GroundTruth> gt;
  const ObservationBundle bundle = read_bundle(bundle_dir, &gt);
  if (!gt) {
    throw MissingArtifact("groundtruth/ missing; run simulate");
  }
  const ArticulationTrajectory traj = read_stage1(bundle_dir);
  const SegmentationResult seg = read_segmentation(bundle_dir);
  const MetricsConfig mc = metrics_from_config(cfg);

  std::string body_source = "body_init";
  BodyParams body = bundle.body_init;
  const std::string s2path =
      (fs::path(bundle_dir) / "stage2_body.json").string();
  if (fs::exists(s2path)) {
    body = body_params_from_json(read_json_file(s2path));
    body_source = "stage2_body";
  }

  MetricReport report;
  report.rotation = rotation_errors(traj.transforms, gt->transforms);

  // Interaction metrics are computed against the reconstructed object
  // states (Stage I transforms applied to the bundle splats and surface).
  std::vector<std::vector<Vec3>> object_points(static_cast<size_t>(bundle.frames));
  for (int t = 0; t < bundle.frames; ++t) {
    object_points[size_t(t)].reserve(bundle.splats_canonical.size());
    for (size_t i = 0; i < bundle.splats_canonical.size(); ++i) {
      const Vec3& mu = bundle.splats_canonical[i].mean;
      object_points[size_t(t)].push_back(
          seg.assignment.dynamic[i] ? traj.transforms[size_t(t)].apply(mu)
                                    : mu);
    }
  }
  report.contact_pct =
      contact_percentage(body, object_points, mc.contact_threshold);
  report.penetration_pct = penetration_percentage(
      body, pose_surface_samples(gt->surface, traj.transforms),
      mc.penetration_eps);
  report.foot_sliding = foot_sliding(body, mc.ground_height,
                                     mc.ground_contact_dist,
                                     mc.slide_threshold);
  report.smoothness = motion_smoothness(body, mc.fps);

  ordered_json out = report_to_json(report);
  out["body_source"] = body_source;
  out["config"] = config_to_json(cfg);
  write_json_file((fs::path(bundle_dir) / "report.json").string(), out);
  return out;
}

}  // namespace arthoi
