#include "arthoi/scene.hpp"

#include <cmath>
#include <stdexcept>

#include "arthoi/rng.hpp"

namespace arthoi {

namespace {

// Splat fields are serialized as float32; quantizing at build time keeps
// write/read round trips bit-exact.
inline double q32(double v) { return double(float(v)); }

inline Vec3 q32(const Vec3& v) {
  return Vec3(q32(v.x()), q32(v.y()), q32(v.z()));
}

double smoothstep01(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// Axis-aligned rectangle patch; u/v span two axes, w is the fixed one.
struct Patch {
  Vec3 origin;
  Vec3 u;  // full edge vector
  Vec3 v;
  Vec3 normal;
};

void sample_patch(const Patch& patch, double density, double radius,
                  double opacity, Rng& rng, std::vector<Splat>* out,
                  SurfaceSamples* surf, double surf_density) {
  const double area = patch.u.norm() * patch.v.norm();
  const int n = int(std::lround(area * density));
  for (int i = 0; i < n; ++i) {
    const double a = rng.uniform();
    const double b = rng.uniform();
    Splat s;
    s.mean = q32(Vec3(patch.origin + a * patch.u + b * patch.v));
    s.radius = q32(radius);
    s.opacity = q32(opacity);
    out->push_back(s);
  }
  if (surf) {
    const int m = std::max(1, int(std::lround(area * surf_density)));
    for (int i = 0; i < m; ++i) {
      const double a = rng.uniform();
      const double b = rng.uniform();
      surf->points.push_back(patch.origin + a * patch.u + b * patch.v);
      surf->normals.push_back(patch.normal);
    }
  }
}

}  // namespace

ArticulatedScene build_scene(const SceneDescriptor& spec) {
  if (spec.template_name != "hinged-door" && spec.template_name != "drawer") {
    throw std::invalid_argument("build_scene: unknown template '" +
                                spec.template_name + "'");
  }
  if (spec.panel_width <= 0 || spec.panel_height <= 0 || spec.border <= 0 ||
      spec.box_depth <= 0 || spec.splat_density <= 0 ||
      spec.splat_radius <= 0 || spec.frames < 1) {
    throw std::invalid_argument("build_scene: non-positive dimension");
  }

  ArticulatedScene scene;
  scene.descriptor = spec;
  Rng rng(spec.seed);

  const double pw = spec.panel_width, ph = spec.panel_height;
  const double bw = pw + 2.0 * spec.border;       // box width
  const double bh = ph + 2.0 * spec.border;       // box height
  const double bd = spec.box_depth;
  const double yf = scene.front_y;                // front face plane
  const double yb = yf + bd;
  const double z0 = spec.border;                  // opening bottom
  const double z1 = z0 + ph;
  const double x0 = -pw / 2.0, x1 = pw / 2.0;     // opening sides
  const double hw = bw / 2.0;
  scene.front_center = Vec3(0.0, yf, spec.border + ph / 2.0);

  const double dens = spec.splat_density;
  const double rad = spec.splat_radius;
  const double op = spec.splat_opacity;
  const double surf_dens = std::min(dens, 250.0);

  // Static shell: back, sides, top, bottom, and the face frame around the
  // opening (four bars of the front face).
  const std::vector<Patch> static_patches = {
      // back face, normal +y (outward)
      {Vec3(-hw, yb, 0), Vec3(bw, 0, 0), Vec3(0, 0, bh), Vec3(0, 1, 0)},
      // left face
      {Vec3(-hw, yf, 0), Vec3(0, bd, 0), Vec3(0, 0, bh), Vec3(-1, 0, 0)},
      // right face
      {Vec3(hw, yf, 0), Vec3(0, bd, 0), Vec3(0, 0, bh), Vec3(1, 0, 0)},
      // top
      {Vec3(-hw, yf, bh), Vec3(bw, 0, 0), Vec3(0, bd, 0), Vec3(0, 0, 1)},
      // bottom
      {Vec3(-hw, yf, 0), Vec3(bw, 0, 0), Vec3(0, bd, 0), Vec3(0, 0, -1)},
      // face frame: left bar, right bar, bottom bar, top bar (normal -y)
      {Vec3(-hw, yf, 0), Vec3(x0 + hw, 0, 0), Vec3(0, 0, bh), Vec3(0, -1, 0)},
      {Vec3(x1, yf, 0), Vec3(hw - x1, 0, 0), Vec3(0, 0, bh), Vec3(0, -1, 0)},
      {Vec3(x0, yf, 0), Vec3(pw, 0, 0), Vec3(0, 0, z0), Vec3(0, -1, 0)},
      {Vec3(x0, yf, z1), Vec3(pw, 0, 0), Vec3(0, 0, bh - z1), Vec3(0, -1, 0)},
  };
  SurfaceSamples surf;
  size_t n_static_surf = 0;
  for (const Patch& p : static_patches) {
    sample_patch(p, dens, rad, op, rng, &scene.static_splats, &surf,
                 surf_dens);
  }
  n_static_surf = surf.points.size();

  // Dynamic panel, sitting panel_gap in front of the face. The door keeps a
  // bare strip next to the hinge so no tracked point there falls below the
  // static flow threshold.
  const bool hinged = spec.template_name == "hinged-door";
  const double yp = yf - spec.panel_gap;
  const double margin = hinged ? spec.hinge_margin : 0.0;
  const Patch panel = {Vec3(x0, yp, z0), Vec3(pw - margin, 0, 0),
                       Vec3(0, 0, ph), Vec3(0, -1, 0)};
  sample_patch(panel, dens, rad, op, rng, &scene.dynamic_splats_canonical,
               &surf, surf_dens);

  // Handle knob: a small cluster protruding toward the camera near the edge
  // far from the hinge, at reach height.
  const double knob_x = x0 + 0.06 * pw;
  const double knob_z = z0 + 0.85 * ph;
  scene.handle_point_canonical =
      q32(Vec3(knob_x, yp - spec.knob_offset, knob_z));
  {
    Splat knob;
    knob.mean = scene.handle_point_canonical;
    knob.radius = q32(rad);
    knob.opacity = q32(op);
    scene.dynamic_splats_canonical.push_back(knob);
    for (int i = 0; i < 3; ++i) {
      Splat s;
      s.mean = q32(Vec3(knob_x, yp - spec.knob_offset * (0.3 + 0.3 * i),
                        knob_z + (i - 1) * 0.01));
      s.radius = q32(rad * 0.7);
      s.opacity = q32(op);
      scene.dynamic_splats_canonical.push_back(s);
    }
    surf.points.push_back(scene.handle_point_canonical);
    surf.normals.push_back(Vec3(0, -1, 0));
  }
  for (size_t i = 0; i < surf.points.size(); ++i) {
    surf.dynamic.push_back(i >= n_static_surf ? 1 : 0);
  }
  scene.surface = surf;

  if (hinged) {
    scene.joint.kind = JointKind::Hinge;
    scene.joint.pivot = Vec3(x1, yp, z0 + ph / 2.0);
    scene.joint.axis = Vec3(0, 0, 1);
  } else {
    scene.joint.kind = JointKind::Prismatic;
    scene.joint.pivot = Vec3(0, yp, z0 + ph / 2.0);
    scene.joint.axis = Vec3(0, -1, 0);  // slides out toward the camera
  }

  // Hold, smooth ramp, hold.
  scene.angle_trajectory.resize(spec.frames);
  const double t0 = spec.open_start_frac * (spec.frames - 1);
  const double t1 = spec.open_end_frac * (spec.frames - 1);
  for (int t = 0; t < spec.frames; ++t) {
    const double u = t1 > t0 ? (t - t0) / (t1 - t0) : 1.0;
    scene.angle_trajectory[t] = spec.travel * smoothstep01(u);
  }
  return scene;
}

RigidTransform gt_transform(const ArticulatedScene& scene, int t) {
  if (t < 0 || t >= scene.frames()) {
    throw std::out_of_range("gt_transform: frame out of range");
  }
  const double a = scene.angle_trajectory[t];
  if (scene.joint.kind == JointKind::Prismatic) {
    return RigidTransform(Rotation::identity(), a * scene.joint.axis);
  }
  const Rotation r = Rotation::from_axis_angle(scene.joint.axis, a);
  return RigidTransform(r, scene.joint.pivot - r * scene.joint.pivot);
}

PinholeCamera default_camera(const ArticulatedScene& scene, int width,
                             int height, double fx, double fy) {
  const Vec3 target = scene.front_center;
  Vec3 pos;
  if (scene.joint.kind == JointKind::Hinge) {
    pos = Vec3(0.0, 0.0, target.z() + 0.15);
  } else {
    // Oblique view so a drawer sliding along the face normal produces
    // lateral image motion at every tracked point.
    pos = Vec3(-1.0, 0.1, target.z() + 0.15);
  }
  return PinholeCamera::look_at(fx, fy, width / 2.0, height / 2.0, width,
                                height, pos, target);
}

}  // namespace arthoi
