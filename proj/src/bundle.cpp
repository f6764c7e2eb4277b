#include "arthoi/bundle.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace arthoi {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string mask_name(const char* prefix, int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d.pgm", prefix, t);
  return buf;
}

void put_u32(std::ofstream& f, uint32_t v) {
  // little-endian
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
               char((v >> 24) & 0xff)};
  f.write(b, 4);
}

uint32_t get_u32(std::ifstream& f, const std::string& file) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw BundleError("truncated file: " + file);
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
         (uint32_t(b[3]) << 24);
}

void put_f32(std::ofstream& f, float v) {
  static_assert(sizeof(float) == 4);
  char b[4];
  std::memcpy(b, &v, 4);
  f.write(b, 4);
}

float get_f32(std::ifstream& f, const std::string& file) {
  char b[4];
  f.read(b, 4);
  if (!f) throw BundleError("truncated file: " + file);
  float v;
  std::memcpy(&v, b, 4);
  return v;
}

void write_tracks(const std::string& path, const TrackSet& tracks) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw BundleError("cannot write: " + path);
  f.write("ATK1", 4);
  put_u32(f, uint32_t(tracks.n_points));
  put_u32(f, uint32_t(tracks.n_frames));
  for (int p = 0; p < tracks.n_points; ++p) {
    for (int t = 0; t < tracks.n_frames; ++t) {
      const size_t i = tracks.idx(p, t);
      put_f32(f, tracks.px[i]);
      put_f32(f, tracks.py[i]);
      f.put(char(tracks.visible[i]));
    }
  }
  if (!f) throw BundleError("write failed: " + path);
}

TrackSet read_tracks(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw BundleError("missing file: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::strncmp(magic, "ATK1", 4) != 0) {
    throw BundleError("bad magic in tracks.bin: " + path);
  }
  TrackSet tracks;
  const uint32_t n_points = get_u32(f, "tracks.bin");
  const uint32_t n_frames = get_u32(f, "tracks.bin");
  tracks.resize(int(n_points), int(n_frames));
  for (uint32_t p = 0; p < n_points; ++p) {
    for (uint32_t t = 0; t < n_frames; ++t) {
      const size_t i = tracks.idx(int(p), int(t));
      tracks.px[i] = get_f32(f, "tracks.bin");
      tracks.py[i] = get_f32(f, "tracks.bin");
      int c = f.get();
      if (c == EOF) throw BundleError("truncated file: tracks.bin");
      tracks.visible[i] = uint8_t(c);
    }
  }
  return tracks;
}

void write_splats(const std::string& path, const std::vector<Splat>& splats) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw BundleError("cannot write: " + path);
  f.write("SPL1", 4);
  put_u32(f, uint32_t(splats.size()));
  for (const Splat& s : splats) {
    put_f32(f, float(s.mean.x()));
    put_f32(f, float(s.mean.y()));
    put_f32(f, float(s.mean.z()));
    put_f32(f, float(s.radius));
    put_f32(f, float(s.opacity));
  }
  if (!f) throw BundleError("write failed: " + path);
}

std::vector<Splat> read_splats(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw BundleError("missing file: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::strncmp(magic, "SPL1", 4) != 0) {
    throw BundleError("bad magic in splats.bin: " + path);
  }
  const uint32_t n = get_u32(f, "splats.bin");
  std::vector<Splat> splats(n);
  for (uint32_t i = 0; i < n; ++i) {
    splats[i].mean.x() = get_f32(f, "splats.bin");
    splats[i].mean.y() = get_f32(f, "splats.bin");
    splats[i].mean.z() = get_f32(f, "splats.bin");
    splats[i].radius = get_f32(f, "splats.bin");
    splats[i].opacity = get_f32(f, "splats.bin");
  }
  return splats;
}

ordered_json vec3_to_json(const Vec3& v) {
  return ordered_json::array({v.x(), v.y(), v.z()});
}

Vec3 vec3_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) {
    throw BundleError("expected 3-vector at " + where);
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

ordered_json transform_to_json(const RigidTransform& t) {
  ordered_json j;
  j["q"] = {t.rotation.w(), t.rotation.x(), t.rotation.y(), t.rotation.z()};
  j["t"] = vec3_to_json(t.translation);
  return j;
}

RigidTransform transform_from_json(const json& j) {
  const auto& q = j.at("q");
  return RigidTransform(
      Rotation(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
               q[3].get<double>()),
      vec3_from_json(j.at("t"), "transform.t"));
}

ordered_json body_params_to_json(const BodyParams& p) {
  ordered_json j;
  j["shape_scale"] = p.shape_scale;
  ordered_json frames = ordered_json::array();
  for (int t = 0; t < p.frames(); ++t) {
    ordered_json f;
    ordered_json pose = ordered_json::array();
    for (int k = 0; k < kNumJoints; ++k) {
      pose.push_back(vec3_to_json(p.joint_rotvec[t][k]));
    }
    f["pose"] = pose;
    f["root"] = vec3_to_json(p.root_translation[t]);
    frames.push_back(f);
  }
  j["frames"] = frames;
  return j;
}

BodyParams body_params_from_json(const json& j) {
  BodyParams p;
  p.shape_scale = j.at("shape_scale").get<double>();
  const auto& frames = j.at("frames");
  p.resize(int(frames.size()));
  for (size_t t = 0; t < frames.size(); ++t) {
    const auto& pose = frames[t].at("pose");
    if (pose.size() != kNumJoints) {
      throw BundleError("body params: wrong joint count in frame " +
                        std::to_string(t));
    }
    for (int k = 0; k < kNumJoints; ++k) {
      p.joint_rotvec[t][k] = vec3_from_json(pose[k], "pose");
    }
    p.root_translation[t] = vec3_from_json(frames[t].at("root"), "root");
  }
  return p;
}

void write_json_file(const std::string& path, const ordered_json& j) {
  std::ofstream f(path);
  if (!f) throw BundleError("cannot write: " + path);
  f << j.dump(2) << "\n";
  if (!f) throw BundleError("write failed: " + path);
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw BundleError("missing file: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw BundleError("bad JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_bundle(const ObservationBundle& bundle,
                  const std::optional<GroundTruth>& gt,
                  const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "masks", ec);
  if (ec || !fs::is_directory(dir)) {
    throw BundleError("cannot create bundle directory: " + dir);
  }

  ordered_json manifest;
  manifest["version"] = bundle.meta.version;
  manifest["template"] = bundle.meta.template_name;
  manifest["frames"] = bundle.frames;
  manifest["fps"] = bundle.meta.fps;
  manifest["image_width"] = bundle.camera.width;
  manifest["image_height"] = bundle.camera.height;
  manifest["fx"] = bundle.camera.fx;
  manifest["fy"] = bundle.camera.fy;
  manifest["cx"] = bundle.camera.cx;
  manifest["cy"] = bundle.camera.cy;
  manifest["world_to_camera"] = transform_to_json(bundle.camera.world_to_camera);
  manifest["seed"] = bundle.meta.seed;
  manifest["sigma_track"] = bundle.meta.sigma_track;
  manifest["sigma_pose"] = bundle.meta.sigma_pose;
  manifest["sigma_root"] = bundle.meta.sigma_root;
  manifest["config_hash"] = bundle.meta.config_hash;
  write_json_file((fs::path(dir) / "manifest.json").string(), manifest);

  write_tracks((fs::path(dir) / "tracks.bin").string(), bundle.tracks);
  write_splats((fs::path(dir) / "splats.bin").string(),
               bundle.splats_canonical);

  for (int t = 0; t < bundle.frames; ++t) {
    const fs::path md = fs::path(dir) / "masks";
    write_pgm((md / mask_name("obj", t)).string(), bundle.mask_object[t]);
    write_pgm((md / mask_name("hum", t)).string(), bundle.mask_human[t]);
    write_pgm((md / mask_name("sam", t)).string(), bundle.mask_object_sam[t]);
  }

  ordered_json body = body_params_to_json(bundle.body_init);
  ordered_json conf = ordered_json::array();
  for (double c : bundle.joint_confidence) conf.push_back(c);
  body["joint_confidence"] = conf;
  ordered_json feet = ordered_json::array();
  for (const auto& f : bundle.foot_contact_flags) {
    feet.push_back({bool(f[0]), bool(f[1])});
  }
  body["foot_contact"] = feet;
  write_json_file((fs::path(dir) / "body_init.json").string(), body);

  if (gt) {
    const fs::path gd = fs::path(dir) / "groundtruth";
    fs::create_directories(gd);
    ordered_json transforms = ordered_json::array();
    for (const RigidTransform& t : gt->transforms) {
      transforms.push_back(transform_to_json(t));
    }
    write_json_file((gd / "transforms.json").string(), transforms);

    ordered_json labels = ordered_json::array();
    for (uint8_t l : gt->splat_labels) labels.push_back(int(l));
    write_json_file((gd / "labels.json").string(), labels);

    write_json_file((gd / "body_true.json").string(),
                    body_params_to_json(gt->body_true));

    write_json_file((gd / "contact_frames.json").string(),
                    ordered_json(gt->contact_frames));

    ordered_json meta;
    meta["joint_kind"] =
        gt->joint.kind == JointKind::Hinge ? "hinge" : "prismatic";
    meta["pivot"] = vec3_to_json(gt->joint.pivot);
    meta["axis"] = vec3_to_json(gt->joint.axis);
    meta["handle_canonical"] = vec3_to_json(gt->handle_canonical);
    write_json_file((gd / "meta.json").string(), meta);

    ordered_json surface;
    ordered_json pts = ordered_json::array(), nrm = ordered_json::array(),
                 dyn = ordered_json::array();
    for (size_t i = 0; i < gt->surface.points.size(); ++i) {
      pts.push_back(vec3_to_json(gt->surface.points[i]));
      nrm.push_back(vec3_to_json(gt->surface.normals[i]));
      dyn.push_back(int(gt->surface.dynamic[i]));
    }
    surface["points"] = pts;
    surface["normals"] = nrm;
    surface["dynamic"] = dyn;
    write_json_file((gd / "surface.json").string(), surface);
  }
}

ObservationBundle read_bundle(const std::string& dir,
                              std::optional<GroundTruth>* gt) {
  ObservationBundle bundle;
  const json manifest =
      read_json_file((fs::path(dir) / "manifest.json").string());
  try {
    bundle.meta.version = manifest.at("version").get<std::string>();
    bundle.meta.template_name = manifest.at("template").get<std::string>();
    bundle.frames = manifest.at("frames").get<int>();
    bundle.meta.fps = manifest.at("fps").get<double>();
    bundle.camera.width = manifest.at("image_width").get<int>();
    bundle.camera.height = manifest.at("image_height").get<int>();
    bundle.camera.fx = manifest.at("fx").get<double>();
    bundle.camera.fy = manifest.at("fy").get<double>();
    bundle.camera.cx = manifest.at("cx").get<double>();
    bundle.camera.cy = manifest.at("cy").get<double>();
    bundle.camera.world_to_camera =
        transform_from_json(manifest.at("world_to_camera"));
    bundle.meta.seed = manifest.at("seed").get<uint64_t>();
    bundle.meta.sigma_track = manifest.at("sigma_track").get<double>();
    bundle.meta.sigma_pose = manifest.at("sigma_pose").get<double>();
    bundle.meta.sigma_root = manifest.at("sigma_root").get<double>();
    bundle.meta.config_hash = manifest.at("config_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw BundleError(std::string("manifest.json: missing/invalid field: ") +
                      e.what());
  }

  bundle.tracks = read_tracks((fs::path(dir) / "tracks.bin").string());
  bundle.splats_canonical =
      read_splats((fs::path(dir) / "splats.bin").string());

  bundle.mask_object.reserve(bundle.frames);
  for (int t = 0; t < bundle.frames; ++t) {
    const fs::path md = fs::path(dir) / "masks";
    bundle.mask_object.push_back(
        read_pgm_mask((md / mask_name("obj", t)).string()));
    bundle.mask_human.push_back(
        read_pgm_mask((md / mask_name("hum", t)).string()));
    bundle.mask_object_sam.push_back(
        read_pgm_mask((md / mask_name("sam", t)).string()));
  }

  const json body =
      read_json_file((fs::path(dir) / "body_init.json").string());
  try {
    bundle.body_init = body_params_from_json(body);
    const auto& conf = body.at("joint_confidence");
    for (int k = 0; k < kNumJoints; ++k) {
      bundle.joint_confidence[size_t(k)] = conf.at(size_t(k)).get<double>();
    }
    for (const auto& f : body.at("foot_contact")) {
      bundle.foot_contact_flags.push_back(
          {uint8_t(f[0].get<bool>()), uint8_t(f[1].get<bool>())});
    }
  } catch (const json::exception& e) {
    throw BundleError(std::string("body_init.json: missing/invalid field: ") +
                      e.what());
  }

  if (gt) {
    gt->reset();
    const fs::path gd = fs::path(dir) / "groundtruth";
    if (fs::is_directory(gd)) {
      GroundTruth g;
      for (const auto& j : read_json_file((gd / "transforms.json").string())) {
        g.transforms.push_back(transform_from_json(j));
      }
      for (const auto& j : read_json_file((gd / "labels.json").string())) {
        g.splat_labels.push_back(uint8_t(j.get<int>()));
      }
      g.body_true = body_params_from_json(
          read_json_file((gd / "body_true.json").string()));
      for (const auto& j :
           read_json_file((gd / "contact_frames.json").string())) {
        g.contact_frames.push_back(j.get<int>());
      }
      const json meta = read_json_file((gd / "meta.json").string());
      g.joint.kind = meta.at("joint_kind").get<std::string>() == "hinge"
                         ? JointKind::Hinge
                         : JointKind::Prismatic;
      g.joint.pivot = vec3_from_json(meta.at("pivot"), "meta.pivot");
      g.joint.axis = vec3_from_json(meta.at("axis"), "meta.axis");
      g.handle_canonical =
          vec3_from_json(meta.at("handle_canonical"), "meta.handle");
      const json surface = read_json_file((gd / "surface.json").string());
      for (const auto& j : surface.at("points")) {
        g.surface.points.push_back(vec3_from_json(j, "surface.points"));
      }
      for (const auto& j : surface.at("normals")) {
        g.surface.normals.push_back(vec3_from_json(j, "surface.normals"));
      }
      for (const auto& j : surface.at("dynamic")) {
        g.surface.dynamic.push_back(uint8_t(j.get<int>()));
      }
      *gt = std::move(g);
    }
  }
  return bundle;
}

}  // namespace arthoi
