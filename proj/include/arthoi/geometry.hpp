// Lie-group math for SO(3)/SE(3), pinhole projection and angular distances.
// All angles are radians internally; metric code converts to degrees at the
// reporting boundary.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

namespace arthoi {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;

/// Skew-symmetric matrix such that skew(v) * u = v x u.
inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return s;
}

/// Unit-quaternion rotation. Constructors normalize, so the unit-norm
/// invariant survives every operation up to rounding.
class Rotation {
 public:
  Rotation() : q_(1.0, 0.0, 0.0, 0.0) {}
  explicit Rotation(const Eigen::Quaterniond& q) : q_(q.normalized()) {}
  Rotation(double w, double x, double y, double z) : q_(w, x, y, z) {
    q_.normalize();
  }

  static Rotation identity() { return Rotation(); }

  /// Rotation by `angle` radians about a (not necessarily unit) axis.
  static Rotation from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (n < 1e-300) return Rotation();
    return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis / n)));
  }

  const Eigen::Quaterniond& quat() const { return q_; }
  double w() const { return q_.w(); }
  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }

  Mat3 matrix() const { return q_.toRotationMatrix(); }

  Rotation inverse() const { return Rotation(q_.conjugate()); }

  Vec3 operator*(const Vec3& p) const { return q_ * p; }

  Rotation operator*(const Rotation& rhs) const {
    return Rotation(q_ * rhs.q_);
  }

  bool isApprox(const Rotation& rhs, double tol = 1e-12) const {
    // q and -q are the same rotation.
    return q_.coeffs().isApprox(rhs.q_.coeffs(), tol) ||
           q_.coeffs().isApprox(-rhs.q_.coeffs(), tol);
  }

 private:
  Eigen::Quaterniond q_;
};

/// Rodrigues exponential map so(3) -> SO(3). Continuous at zero.
inline Rotation so3_exp(const Vec3& rotvec) {
  const double theta = rotvec.norm();
  if (theta < 1e-12) {
    // First-order quaternion; normalization in the constructor cleans up.
    return Rotation(1.0, 0.5 * rotvec.x(), 0.5 * rotvec.y(),
                    0.5 * rotvec.z());
  }
  return Rotation::from_axis_angle(rotvec, theta);
}

/// Principal-branch logarithm, ||result|| <= pi. At exactly pi the axis sign
/// is ambiguous; we pick the sign making the first nonzero component
/// positive so the map stays deterministic.
inline Vec3 so3_log(const Rotation& r) {
  Eigen::Quaterniond q = r.quat();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v(q.x(), q.y(), q.z());
  const double n = v.norm();
  if (n < 1e-12) return 2.0 * v;  // angle ~ 0, first-order inverse
  const double angle = 2.0 * std::atan2(n, q.w());
  Vec3 axis = v / n;
  if (angle > M_PI - 1e-9) {
    // Deterministic tie-break at the branch boundary.
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > 1e-12) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
  }
  return angle * axis;
}

/// Right Jacobian of SO(3): exp(v + d) = exp(v) * exp(Jr(v) d) to first order.
inline Mat3 so3_right_jacobian(const Vec3& v) {
  const double theta2 = v.squaredNorm();
  const Mat3 vx = skew(v);
  double c1, c2;
  if (theta2 < 1e-12) {
    c1 = 0.5 - theta2 / 24.0;
    c2 = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double theta = std::sqrt(theta2);
    c1 = (1.0 - std::cos(theta)) / theta2;
    c2 = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() - c1 * vx + c2 * vx * vx;
}

/// Inverse of the right Jacobian.
inline Mat3 so3_right_jacobian_inv(const Vec3& v) {
  const double theta2 = v.squaredNorm();
  const Mat3 vx = skew(v);
  double c;
  if (theta2 < 1e-12) {
    c = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    const double theta = std::sqrt(theta2);
    c = 1.0 / theta2 -
        (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Mat3::Identity() + 0.5 * vx + c * vx * vx;
}

/// SE(3) element stored as rotation + translation.
struct RigidTransform {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  RigidTransform() = default;
  RigidTransform(const Rotation& r, const Vec3& t)
      : rotation(r), translation(t) {}

  static RigidTransform identity() { return RigidTransform(); }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  RigidTransform compose(const RigidTransform& rhs) const {
    return RigidTransform(rotation * rhs.rotation,
                          rotation * rhs.translation + translation);
  }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return compose(rhs);
  }

  RigidTransform inverse() const {
    const Rotation rinv = rotation.inverse();
    return RigidTransform(rinv, -(rinv * translation));
  }
};

inline Vec3 se3_apply(const RigidTransform& t, const Vec3& p) {
  return t.apply(p);
}

/// Chart used by the per-frame optimizer: xi = (omega, v) maps to the rigid
/// transform (exp(omega), v), applied by left multiplication. Exact inverse
/// of transform_log for rotation angles < pi.
inline RigidTransform transform_exp(const Vec6& xi) {
  return RigidTransform(so3_exp(xi.head<3>()), xi.tail<3>());
}

inline Vec6 transform_log(const RigidTransform& t) {
  Vec6 xi;
  xi.head<3>() = so3_log(t.rotation);
  xi.tail<3>() = t.translation;
  return xi;
}

/// Geodesic distance on SO(3) in degrees, in [0, 180]. Symmetric.
inline double geodesic_angle_deg(const Rotation& a, const Rotation& b) {
  // |dot| of the unit quaternions gives cos(angle/2) regardless of sign.
  double d = std::abs(a.quat().dot(b.quat()));
  d = std::min(d, 1.0);
  return 2.0 * std::acos(d) * 180.0 / M_PI;
}

/// Projection result; `valid` is false for points at or behind the camera.
struct ProjectedPoint {
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;
  bool valid = false;
};

struct PinholeCamera {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  RigidTransform world_to_camera;

  /// Camera at `position` looking at `target`, `up` approximately up.
  /// Camera frame: +x right, +y down, +z forward.
  static PinholeCamera look_at(double fx, double fy, double cx, double cy,
                               int width, int height, const Vec3& position,
                               const Vec3& target,
                               const Vec3& up = Vec3(0, 0, 1)) {
    PinholeCamera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = cx;
    cam.cy = cy;
    cam.width = width;
    cam.height = height;
    const Vec3 forward = (target - position).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-9) right = forward.cross(Vec3(0, 1, 0));
    right.normalize();
    const Vec3 down = forward.cross(right).normalized();
    Mat3 r_cw;
    r_cw.col(0) = right;
    r_cw.col(1) = down;
    r_cw.col(2) = forward;
    const Rotation rot_wc(Eigen::Quaterniond(r_cw.transpose()));
    cam.world_to_camera =
        RigidTransform(rot_wc, -(rot_wc * position));
    return cam;
  }

  Vec3 to_camera(const Vec3& p_world) const {
    return world_to_camera.apply(p_world);
  }

  Vec3 center() const {
    return world_to_camera.inverse().translation;
  }
};

constexpr double kMinProjectDepth = 1e-9;

inline ProjectedPoint project(const PinholeCamera& cam, const Vec3& p_world) {
  ProjectedPoint out;
  const Vec3 pc = cam.to_camera(p_world);
  out.depth = pc.z();
  if (pc.z() <= kMinProjectDepth) return out;  // behind camera, flagged
  out.pixel.x() = cam.fx * pc.x() / pc.z() + cam.cx;
  out.pixel.y() = cam.fy * pc.y() / pc.z() + cam.cy;
  out.valid = true;
  return out;
}

}  // namespace arthoi
