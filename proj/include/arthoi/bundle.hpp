// Observation bundle: the file package (camera, point tracks, masks,
// initial body parameters) that stands in for the upstream perception
// models. Ground truth rides along in a groundtruth/ subdirectory when the
// bundle comes from the simulator.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "arthoi/body.hpp"
#include "arthoi/geometry.hpp"
#include "arthoi/scene.hpp"
#include "arthoi/splat.hpp"

#include "json.hpp"

namespace arthoi {

/// Per-point 2D trajectories with visibility flags. Pixels are stored as
/// float32, matching the on-disk format, so round trips are bit-exact.
struct TrackSet {
  int n_points = 0;
  int n_frames = 0;
  std::vector<float> px;           // point-major: [point][frame]
  std::vector<float> py;
  std::vector<uint8_t> visible;

  void resize(int points, int frames) {
    n_points = points;
    n_frames = frames;
    px.assign(size_t(points) * frames, 0.f);
    py.assign(size_t(points) * frames, 0.f);
    visible.assign(size_t(points) * frames, 0);
  }
  size_t idx(int p, int t) const { return size_t(p) * n_frames + t; }
  Vec2 pixel(int p, int t) const {
    return Vec2(px[idx(p, t)], py[idx(p, t)]);
  }
  bool vis(int p, int t) const { return visible[idx(p, t)] != 0; }
};

struct BundleMeta {
  std::string version = "1.0";
  std::string template_name;
  uint64_t seed = 0;
  double sigma_track = 0.0;
  double sigma_pose = 0.0;
  double sigma_root = 0.0;
  double fps = 30.0;
  std::string config_hash;
};

struct ObservationBundle {
  PinholeCamera camera;
  int frames = 0;
  BundleMeta meta;
  TrackSet tracks;
  std::vector<Mask> mask_object;
  std::vector<Mask> mask_human;
  std::vector<Mask> mask_object_sam;
  std::vector<Splat> splats_canonical;  // unlabeled object splats
  BodyParams body_init;
  std::vector<std::array<uint8_t, 2>> foot_contact_flags;  // [frame][l,r]
  std::array<double, kNumJoints> joint_confidence{};
};

struct GroundTruth {
  std::vector<RigidTransform> transforms;
  std::vector<uint8_t> splat_labels;  // 1 = dynamic, aligned with bundle
  BodyParams body_true;
  std::vector<int> contact_frames;
  SceneJoint joint;
  Vec3 handle_canonical = Vec3::Zero();
  SurfaceSamples surface;
};

/// Error with the offending file (and field when known) in the message.
struct BundleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_bundle(const ObservationBundle& bundle,
                  const std::optional<GroundTruth>& gt,
                  const std::string& dir);

/// Reads a bundle directory; ground truth is returned when the
/// groundtruth/ subdirectory is present.
ObservationBundle read_bundle(const std::string& dir,
                              std::optional<GroundTruth>* gt = nullptr);

// JSON helpers shared by the artifact writers.
nlohmann::ordered_json transform_to_json(const RigidTransform& t);
RigidTransform transform_from_json(const nlohmann::json& j);
nlohmann::ordered_json body_params_to_json(const BodyParams& p);
BodyParams body_params_from_json(const nlohmann::json& j);
void write_json_file(const std::string& path, const nlohmann::ordered_json& j);
nlohmann::json read_json_file(const std::string& path);

}  // namespace arthoi
