// Synthetic articulated scenes: a box cabinet with a hinged door or a
// sliding drawer front, instrumented with ground-truth transforms, labels
// and contact script so every pipeline stage can be verified quantitatively.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "arthoi/body.hpp"
#include "arthoi/geometry.hpp"
#include "arthoi/splat.hpp"

namespace arthoi {

enum class JointKind { Hinge, Prismatic };

struct SceneDescriptor {
  std::string template_name = "hinged-door";  // or "drawer"
  int frames = 60;
  double panel_width = 0.6;    // m, the moving part
  double panel_height = 1.2;
  double border = 0.1;         // face frame around the opening
  double box_depth = 0.6;
  double panel_gap = 0.02;     // panel sits this far in front of the box
  double hinge_margin = 0.02;  // bare strip next to the hinge, door only
  double knob_offset = 0.05;   // handle knob protrusion toward the camera
  double splat_density = 600.0;  // splats per square meter
  double splat_radius = 0.03;
  double splat_opacity = 0.9;
  double travel = 45.0 * M_PI / 180.0;  // radians (hinge) or meters (drawer)
  double open_start_frac = 1.0 / 6.0;
  double open_end_frac = 5.0 / 6.0;
  uint64_t seed = 1234;
};

struct SceneJoint {
  JointKind kind = JointKind::Hinge;
  Vec3 pivot = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
};

/// Object surface samples with outward normals, used by the penetration
/// metric. `dynamic` marks samples that ride on the moving part.
struct SurfaceSamples {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<uint8_t> dynamic;
};

struct ArticulatedScene {
  SceneDescriptor descriptor;
  std::vector<Splat> static_splats;
  std::vector<Splat> dynamic_splats_canonical;
  SceneJoint joint;
  std::vector<double> angle_trajectory;  // radians or meters, per frame
  Vec3 handle_point_canonical = Vec3::Zero();
  SurfaceSamples surface;  // canonical pose

  // Geometry anchors reused by the camera/body placement code.
  double front_y = 1.4;   // front face plane of the box
  Vec3 front_center = Vec3::Zero();

  int frames() const { return int(angle_trajectory.size()); }
};

/// Procedural cabinet with a hinged door or drawer front. Deterministic
/// given the descriptor (including its seed). Rejects non-positive
/// dimensions and unknown templates.
ArticulatedScene build_scene(const SceneDescriptor& spec);

/// Closed-form rigid transform of the dynamic part at frame t.
/// Hinge: Trans(pivot) * Rot(axis, angle) * Trans(-pivot).
/// Prismatic: pure translation angle * axis.
RigidTransform gt_transform(const ArticulatedScene& scene, int t);

/// Default camera for a scene template: frontal for doors, oblique for
/// drawers (so prismatic motion has lateral image flow everywhere).
PinholeCamera default_camera(const ArticulatedScene& scene, int width,
                             int height, double fx, double fy);

}  // namespace arthoi
