#include "arthoi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace arthoi {

RotationStats rotation_errors(const std::vector<RigidTransform>& est,
                              const std::vector<RigidTransform>& gt) {
  if (est.size() != gt.size() || est.empty()) {
    throw std::invalid_argument("rotation_errors: length mismatch");
  }
  std::vector<double> errs(est.size());
  for (size_t t = 0; t < est.size(); ++t) {
    errs[t] = geodesic_angle_deg(est[t].rotation, gt[t].rotation);
  }
  RotationStats out;
  double sum = 0.0;
  out.max = errs[0];
  out.min = errs[0];
  for (double e : errs) {
    sum += e;
    out.max = std::max(out.max, e);
    out.min = std::min(out.min, e);
  }
  out.mean = sum / double(errs.size());
  double var = 0.0;
  for (double e : errs) var += (e - out.mean) * (e - out.mean);
  out.stddev = std::sqrt(var / double(errs.size()));  // population
  std::sort(errs.begin(), errs.end());
  const size_t n = errs.size();
  out.median = n % 2 == 1 ? errs[n / 2] : 0.5 * (errs[n / 2 - 1] + errs[n / 2]);
  return out;
}

double contact_percentage(const BodyParams& params,
                          const std::vector<std::vector<Vec3>>& object_points,
                          double threshold_m) {
  if (threshold_m <= 0.0) {
    throw std::invalid_argument("contact_percentage: threshold must be > 0");
  }
  const int F = params.frames();
  int contact = 0;
  for (int t = 0; t < F; ++t) {
    const FkFrame fkf = fk(params, t);
    const double t2 = threshold_m * threshold_m;
    bool found = false;
    for (int j : {int(kLWrist), int(kRWrist)}) {
      for (const Vec3& q : object_points[size_t(t)]) {
        if ((fkf.joint_pos[size_t(j)] - q).squaredNorm() <= t2) {
          found = true;
          break;
        }
      }
      if (found) break;
    }
    if (found) ++contact;
  }
  return 100.0 * double(contact) / double(F);
}

double penetration_percentage(const BodyParams& params,
                              const std::vector<SurfaceSamples>& posed_surface,
                              double eps) {
  const int F = params.frames();
  const auto& surface = body_surface_vertices();
  long penetrating = 0;
  long total = 0;
  for (int t = 0; t < F; ++t) {
    const FkFrame fkf = fk(params, t);
    const SurfaceSamples& obj = posed_surface[size_t(t)];
    for (const SurfaceVertex& sv : surface) {
      const Vec3 v = fkf.vertex_position(sv);
      double best_d2 = std::numeric_limits<double>::max();
      size_t best = 0;
      for (size_t i = 0; i < obj.points.size(); ++i) {
        const double d2 = (v - obj.points[i]).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = i;
        }
      }
      ++total;
      if (obj.points.empty()) continue;
      const double signed_dist = (v - obj.points[best]).dot(obj.normals[best]);
      if (signed_dist < -eps) ++penetrating;
    }
  }
  return total == 0 ? 0.0 : 100.0 * double(penetrating) / double(total);
}

double foot_sliding(const BodyParams& params, double ground_height,
                    double contact_dist, double slide_thresh) {
  const int F = params.frames();
  if (F < 2) throw std::invalid_argument("foot_sliding: need >= 2 frames");
  const int foot_joints[4] = {kLAnkle, kLToe, kRAnkle, kRToe};

  std::vector<FkFrame> fks(static_cast<size_t>(F));
  for (int t = 0; t < F; ++t) fks[size_t(t)] = fk(params, t);

  long contact_transitions = 0;
  long sliding_transitions = 0;
  double slide_sum = 0.0;
  for (int t = 1; t < F; ++t) {
    for (int j : foot_joints) {
      const Vec3 pos = fks[size_t(t)].joint_pos[size_t(j)];
      if (pos.z() - ground_height > contact_dist) continue;
      ++contact_transitions;
      const Vec3 prev = fks[size_t(t - 1)].joint_pos[size_t(j)];
      const double horizontal =
          std::hypot(pos.x() - prev.x(), pos.y() - prev.y());
      if (horizontal > slide_thresh) {
        ++sliding_transitions;
        slide_sum += horizontal;
      }
    }
  }
  if (contact_transitions == 0 || sliding_transitions == 0) return 0.0;
  const double ratio =
      double(sliding_transitions) / double(contact_transitions);
  const double mean_slide = slide_sum / double(sliding_transitions);
  return ratio * mean_slide;
}

double motion_smoothness(const BodyParams& params, double fps) {
  const int F = params.frames();
  if (F < 2) throw std::invalid_argument("motion_smoothness: need >= 2 frames");
  std::vector<FkFrame> fks(static_cast<size_t>(F));
  for (int t = 0; t < F; ++t) fks[size_t(t)] = fk(params, t);
  std::vector<double> speeds;
  speeds.reserve(size_t(F - 1) * kNumJoints);
  for (int t = 1; t < F; ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      speeds.push_back((fks[size_t(t)].joint_pos[size_t(j)] -
                        fks[size_t(t - 1)].joint_pos[size_t(j)])
                           .norm() *
                       fps);
    }
  }
  double mean = 0.0;
  for (double s : speeds) mean += s;
  mean /= double(speeds.size());
  double var = 0.0;
  for (double s : speeds) var += (s - mean) * (s - mean);
  return std::sqrt(var / double(speeds.size()));
}

nlohmann::ordered_json report_to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["rot_mean"] = report.rotation.mean;
  j["rot_std"] = report.rotation.stddev;
  j["rot_max"] = report.rotation.max;
  j["rot_min"] = report.rotation.min;
  j["rot_median"] = report.rotation.median;
  j["contact_pct"] = report.contact_pct;
  j["penetration_pct"] = report.penetration_pct;
  j["foot_sliding"] = report.foot_sliding;
  j["smoothness"] = report.smoothness;
  return j;
}

std::vector<SurfaceSamples> pose_surface_samples(
    const SurfaceSamples& canonical,
    const std::vector<RigidTransform>& transforms) {
  std::vector<SurfaceSamples> out(transforms.size());
  for (size_t t = 0; t < transforms.size(); ++t) {
    out[t] = canonical;
    for (size_t i = 0; i < canonical.points.size(); ++i) {
      if (canonical.dynamic[i]) {
        out[t].points[i] = transforms[t].apply(canonical.points[i]);
        out[t].normals[i] = transforms[t].rotation * canonical.normals[i];
      }
    }
  }
  return out;
}

}  // namespace arthoi
