#include "arthoi/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <stdexcept>

#include "arthoi/rng.hpp"

namespace arthoi {

namespace {

double median_of(std::vector<double>& v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 2D grid accelerator for K-nearest projected splats.
class Knn2D {
 public:
  Knn2D(const std::vector<Vec2>& pts, const std::vector<uint8_t>& valid,
        double cell)
      : pts_(pts), valid_(valid), cell_(cell) {
    double min_x = 0, min_y = 0, max_x = 1, max_y = 1;
    bool first = true;
    for (size_t i = 0; i < pts.size(); ++i) {
      if (!valid[i]) continue;
      if (first) {
        min_x = max_x = pts[i].x();
        min_y = max_y = pts[i].y();
        first = false;
      } else {
        min_x = std::min(min_x, pts[i].x());
        max_x = std::max(max_x, pts[i].x());
        min_y = std::min(min_y, pts[i].y());
        max_y = std::max(max_y, pts[i].y());
      }
    }
    ox_ = min_x;
    oy_ = min_y;
    gw_ = std::max(1, int((max_x - min_x) / cell_) + 1);
    gh_ = std::max(1, int((max_y - min_y) / cell_) + 1);
    buckets_.resize(size_t(gw_) * gh_);
    for (size_t i = 0; i < pts.size(); ++i) {
      if (!valid[i]) continue;
      buckets_[bucket_of(pts[i].x(), pts[i].y())].push_back(int(i));
    }
  }

  /// Indices of the K nearest valid points, sorted by (distance^2, index).
  std::vector<std::pair<double, int>> query(double x, double y, int K) const {
    std::vector<std::pair<double, int>> cand;
    const int cx = cell_x(x), cy = cell_y(y);
    const int max_ring = std::max(gw_, gh_);
    for (int r = 0; r <= max_ring; ++r) {
      scan_ring(cx, cy, r, x, y, &cand);
      if (int(cand.size()) >= K) {
        std::nth_element(cand.begin(), cand.begin() + (K - 1), cand.end());
        const double kth = std::sqrt(cand[size_t(K - 1)].first);
        // Every point within (r-1)*cell of the query is guaranteed scanned.
        if (kth <= double(std::max(r - 1, 0)) * cell_) break;
      }
    }
    std::sort(cand.begin(), cand.end());
    if (int(cand.size()) > K) cand.resize(size_t(K));
    return cand;
  }

 private:
  int cell_x(double x) const {
    return std::clamp(int((x - ox_) / cell_), 0, gw_ - 1);
  }
  int cell_y(double y) const {
    return std::clamp(int((y - oy_) / cell_), 0, gh_ - 1);
  }
  size_t bucket_of(double x, double y) const {
    return size_t(cell_y(y)) * gw_ + cell_x(x);
  }
  void scan_ring(int cx, int cy, int r, double x, double y,
                 std::vector<std::pair<double, int>>* cand) const {
    for (int by = cy - r; by <= cy + r; ++by) {
      if (by < 0 || by >= gh_) continue;
      for (int bx = cx - r; bx <= cx + r; ++bx) {
        if (bx < 0 || bx >= gw_) continue;
        if (std::max(std::abs(bx - cx), std::abs(by - cy)) != r) continue;
        for (int i : buckets_[size_t(by) * gw_ + bx]) {
          const double dx = pts_[size_t(i)].x() - x;
          const double dy = pts_[size_t(i)].y() - y;
          cand->emplace_back(dx * dx + dy * dy, i);
        }
      }
    }
  }

  const std::vector<Vec2>& pts_;
  const std::vector<uint8_t>& valid_;
  double cell_;
  double ox_ = 0, oy_ = 0;
  int gw_ = 1, gh_ = 1;
  std::vector<std::vector<int>> buckets_;
};

struct SplatProjection {
  std::vector<Vec2> pixel;
  std::vector<double> depth;
  std::vector<double> rho;
  std::vector<uint8_t> valid;
};

SplatProjection project_splats(const std::vector<Splat>& splats,
                               const PinholeCamera& cam) {
  SplatProjection out;
  const size_t n = splats.size();
  out.pixel.resize(n, Vec2::Zero());
  out.depth.resize(n, 0.0);
  out.rho.resize(n, 1.0);
  out.valid.resize(n, 0);
  for (size_t i = 0; i < n; ++i) {
    const ProjectedPoint p = project(cam, splats[i].mean);
    if (!p.valid) continue;
    out.pixel[i] = p.pixel;
    out.depth[i] = p.depth;
    out.rho[i] = std::max(splats[i].radius * cam.fx / p.depth, 0.3);
    out.valid[i] = 1;
  }
  return out;
}

// Influence of one pixel on its K nearest splats: footprint falloff times
// opacity, attenuated by the accumulated alpha of nearer splats.
std::vector<std::pair<int, double>> pixel_influences(
    const SplatProjection& proj, const std::vector<Splat>& splats,
    const Knn2D& knn, double x, double y, int K) {
  auto nearest = knn.query(x, y, K);
  // Transmittance wants depth order.
  std::sort(nearest.begin(), nearest.end(), [&](const auto& a, const auto& b) {
    if (proj.depth[size_t(a.second)] != proj.depth[size_t(b.second)])
      return proj.depth[size_t(a.second)] < proj.depth[size_t(b.second)];
    return a.second < b.second;
  });
  std::vector<std::pair<int, double>> out;
  out.reserve(nearest.size());
  double transmittance = 1.0;
  for (const auto& [d2, idx] : nearest) {
    const double rho = proj.rho[size_t(idx)];
    const double alpha =
        splats[size_t(idx)].opacity * std::exp(-d2 / (2.0 * rho * rho));
    out.emplace_back(idx, alpha * transmittance);
    transmittance *= 1.0 - alpha;
  }
  return out;
}

}  // namespace

std::pair<int, int> select_frame_pair(const TrackSet& tracks, int min_gap) {
  const int T = tracks.n_frames;
  if (T < min_gap + 1 || T < 2) {
    throw std::invalid_argument(
        "select_frame_pair: sequence shorter than min_gap + 1");
  }
  int best_src = 0, best_tgt = std::min(min_gap, T - 1);
  double best_median = -1.0;
  std::vector<double> mags;
  for (int s = 0; s < T; ++s) {
    for (int t = s + std::max(min_gap, 1); t < T; ++t) {
      mags.clear();
      for (int p = 0; p < tracks.n_points; ++p) {
        if (!tracks.vis(p, s) || !tracks.vis(p, t)) continue;
        mags.push_back((tracks.pixel(p, t) - tracks.pixel(p, s)).norm());
      }
      const double med = median_of(mags);
      if (med > best_median) {
        best_median = med;
        best_src = s;
        best_tgt = t;
      }
    }
  }
  return {best_src, best_tgt};
}

MotionLabelSet classify_tracks(const TrackSet& tracks, int t_src, int t_tgt,
                               double tau_dynamic, double tau_static) {
  if (!(tau_dynamic > tau_static) || tau_static < 0) {
    throw std::invalid_argument("classify_tracks: need tau_dyn > tau_static >= 0");
  }
  MotionLabelSet out;
  out.t_src = t_src;
  out.t_tgt = t_tgt;
  out.label.resize(size_t(tracks.n_points));
  out.magnitude.assign(size_t(tracks.n_points), 0.0);
  for (int p = 0; p < tracks.n_points; ++p) {
    if (!tracks.vis(p, t_src) || !tracks.vis(p, t_tgt)) {
      out.label[size_t(p)] = MotionLabel::Ambiguous;
      continue;
    }
    const double mag = (tracks.pixel(p, t_tgt) - tracks.pixel(p, t_src)).norm();
    out.magnitude[size_t(p)] = mag;
    if (mag > tau_dynamic) {
      out.label[size_t(p)] = MotionLabel::Dynamic;
    } else if (mag <= tau_static) {
      out.label[size_t(p)] = MotionLabel::Static;
    } else {
      out.label[size_t(p)] = MotionLabel::Ambiguous;
    }
  }
  return out;
}

std::vector<Vec2> cluster_prompts(const std::vector<Vec2>& points, int k,
                                  uint64_t seed) {
  if (points.empty() || k < 1) {
    throw std::invalid_argument("cluster_prompts: need points and k >= 1");
  }
  if (int(points.size()) <= k) return points;

  Rng rng(seed);
  const int n = int(points.size());
  std::vector<Vec2> centers;
  centers.reserve(size_t(k));

  // k-means++ seeding.
  centers.push_back(points[size_t(rng.uniform_int(0, n - 1))]);
  std::vector<double> d2(size_t(n), 0.0);
  while (int(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      for (const Vec2& c : centers) {
        best = std::min(best, (points[size_t(i)] - c).squaredNorm());
      }
      d2[size_t(i)] = best;
      total += best;
    }
    if (total <= 0.0) {
      centers.push_back(points[size_t(rng.uniform_int(0, n - 1))]);
      continue;
    }
    double pick = rng.uniform() * total;
    int chosen = n - 1;
    for (int i = 0; i < n; ++i) {
      pick -= d2[size_t(i)];
      if (pick <= 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(points[size_t(chosen)]);
  }

  std::vector<int> assign(size_t(n), -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::max();
      for (int c = 0; c < k; ++c) {
        const double d = (points[size_t(i)] - centers[size_t(c)]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[size_t(i)] != best) {
        assign[size_t(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Vec2> sums(size_t(k), Vec2::Zero());
    std::vector<int> counts(size_t(k), 0);
    for (int i = 0; i < n; ++i) {
      sums[size_t(assign[size_t(i)])] += points[size_t(i)];
      counts[size_t(assign[size_t(i)])] += 1;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[size_t(c)] > 0) centers[size_t(c)] = sums[size_t(c)] / counts[size_t(c)];
    }
  }
  return centers;
}

Mask dense_dynamic_mask(const Mask& object_mask,
                        const std::vector<Vec2>& dyn_prompts,
                        const std::vector<Vec2>& static_prompts) {
  if (dyn_prompts.empty() && static_prompts.empty()) {
    throw std::invalid_argument("dense_dynamic_mask: no prompts");
  }
  Mask out(object_mask.width, object_mask.height, 0);
  for (int y = 0; y < object_mask.height; ++y) {
    for (int x = 0; x < object_mask.width; ++x) {
      if (!object_mask.at(x, y)) continue;
      const Vec2 p(x, y);
      double best_dyn = std::numeric_limits<double>::max();
      double best_static = std::numeric_limits<double>::max();
      for (const Vec2& q : dyn_prompts) {
        best_dyn = std::min(best_dyn, (p - q).squaredNorm());
      }
      for (const Vec2& q : static_prompts) {
        best_static = std::min(best_static, (p - q).squaredNorm());
      }
      // Tie goes static.
      out.at(x, y) = best_dyn < best_static ? 1 : 0;
    }
  }
  return out;
}

PartAssignment backproject_mask(const Mask& mask_dyn, const Mask& mask_static,
                                const std::vector<Splat>& splats,
                                const PinholeCamera& cam, int K) {
  if (K < 1) throw std::invalid_argument("backproject_mask: K >= 1");
  PartAssignment out;
  out.dynamic.assign(splats.size(), 0);
  out.s_dyn.assign(splats.size(), 0.0);
  out.s_static.assign(splats.size(), 0.0);
  const SplatProjection proj = project_splats(splats, cam);
  bool any_valid = false;
  for (uint8_t v : proj.valid) any_valid |= v != 0;
  if (!any_valid) return out;
  const Knn2D knn(proj.pixel, proj.valid, 8.0);

  for (int y = 0; y < mask_dyn.height; ++y) {
    for (int x = 0; x < mask_dyn.width; ++x) {
      const bool is_dyn = mask_dyn.at(x, y) != 0;
      const bool is_static = mask_static.at(x, y) != 0;
      if (!is_dyn && !is_static) continue;
      for (const auto& [idx, w] :
           pixel_influences(proj, splats, knn, x, y, K)) {
        if (is_dyn) out.s_dyn[size_t(idx)] += w;
        if (is_static) out.s_static[size_t(idx)] += w;
      }
    }
  }
  for (size_t i = 0; i < splats.size(); ++i) {
    out.dynamic[i] = out.s_dyn[i] > out.s_static[i] ? 1 : 0;
  }
  return out;
}

PartAssignment refine_connectivity(const PartAssignment& assignment,
                                   const std::vector<Splat>& splats,
                                   int k_nn) {
  if (k_nn < 1) throw std::invalid_argument("refine_connectivity: k_nn >= 1");
  const int n = int(splats.size());
  PartAssignment out = assignment;
  if (n == 0) return out;

  // Symmetric k-NN adjacency on 3D positions.
  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  {
    std::vector<std::pair<double, int>> dists(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        dists[size_t(j)] = {
            (splats[size_t(i)].mean - splats[size_t(j)].mean).squaredNorm(), j};
      }
      dists[size_t(i)].first = std::numeric_limits<double>::max();
      const int take = std::min(k_nn, n - 1);
      std::partial_sort(dists.begin(), dists.begin() + take, dists.end());
      for (int t = 0; t < take; ++t) {
        const int j = dists[size_t(t)].second;
        adj[size_t(i)].push_back(j);
        adj[size_t(j)].push_back(i);
      }
    }
  }

  // Largest connected component within each label class.
  std::vector<int> comp(size_t(n), -1);
  auto flood = [&](int start, int id, uint8_t cls) {
    int count = 0;
    std::queue<int> q;
    q.push(start);
    comp[size_t(start)] = id;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      ++count;
      for (int v : adj[size_t(u)]) {
        if (comp[size_t(v)] == -1 && assignment.dynamic[size_t(v)] == cls) {
          comp[size_t(v)] = id;
          q.push(v);
        }
      }
    }
    return count;
  };
  int next_id = 0;
  std::vector<int> comp_size;
  std::vector<uint8_t> comp_class;
  for (int i = 0; i < n; ++i) {
    if (comp[size_t(i)] != -1) continue;
    const uint8_t cls = assignment.dynamic[size_t(i)];
    comp_size.push_back(flood(i, next_id, cls));
    comp_class.push_back(cls);
    ++next_id;
  }
  int best_dyn = -1, best_stat = -1;
  for (int c = 0; c < next_id; ++c) {
    if (comp_class[size_t(c)] == 1) {
      if (best_dyn == -1 || comp_size[size_t(c)] > comp_size[size_t(best_dyn)])
        best_dyn = c;
    } else {
      if (best_stat == -1 ||
          comp_size[size_t(c)] > comp_size[size_t(best_stat)])
        best_stat = c;
    }
  }

  Vec3 cen_dyn = Vec3::Zero(), cen_stat = Vec3::Zero();
  int n_dyn = 0, n_stat = 0;
  for (int i = 0; i < n; ++i) {
    if (best_dyn != -1 && comp[size_t(i)] == best_dyn) {
      cen_dyn += splats[size_t(i)].mean;
      ++n_dyn;
    } else if (best_stat != -1 && comp[size_t(i)] == best_stat) {
      cen_stat += splats[size_t(i)].mean;
      ++n_stat;
    }
  }
  if (n_dyn > 0) cen_dyn /= n_dyn;
  if (n_stat > 0) cen_stat /= n_stat;

  for (int i = 0; i < n; ++i) {
    const int c = comp[size_t(i)];
    if (c == best_dyn || c == best_stat) continue;  // kept components
    if (n_dyn > 0 && n_stat > 0) {
      const double dd = (splats[size_t(i)].mean - cen_dyn).squaredNorm();
      const double ds = (splats[size_t(i)].mean - cen_stat).squaredNorm();
      out.dynamic[size_t(i)] = dd < ds ? 1 : 0;
    } else if (n_dyn > 0) {
      out.dynamic[size_t(i)] = 1;
    } else if (n_stat > 0) {
      out.dynamic[size_t(i)] = 0;
    }
  }
  return out;
}

double nearest_rank_percentile(std::vector<double> values, double percentile) {
  if (values.empty()) {
    throw std::invalid_argument("nearest_rank_percentile: empty input");
  }
  std::sort(values.begin(), values.end());
  const int n = int(values.size());
  int rank = int(std::ceil(percentile / 100.0 * n));
  rank = std::clamp(rank, 1, n);
  return values[size_t(rank - 1)];
}

QuasiStaticSet extract_quasi_static(const MotionLabelSet& labels,
                                    double percentile, double min_px) {
  std::vector<double> dyn_mags;
  for (size_t i = 0; i < labels.label.size(); ++i) {
    if (labels.label[i] == MotionLabel::Dynamic) {
      dyn_mags.push_back(labels.magnitude[i]);
    }
  }
  if (dyn_mags.empty()) {
    throw std::runtime_error("extract_quasi_static: no dynamic points");
  }
  QuasiStaticSet out;
  out.threshold_px =
      std::max(nearest_rank_percentile(dyn_mags, percentile), min_px);
  for (size_t i = 0; i < labels.label.size(); ++i) {
    if (labels.label[i] == MotionLabel::Dynamic &&
        labels.magnitude[i] <= out.threshold_px) {
      out.point_indices.push_back(int(i));
    }
  }
  return out;
}

BindingSet build_bindings(const QuasiStaticSet& qs, const TrackSet& tracks,
                          int t_src, const PartAssignment& assignment,
                          const std::vector<Splat>& splats,
                          const PinholeCamera& cam, double radius_r, int K) {
  if (radius_r <= 0.0) {
    throw std::invalid_argument("build_bindings: radius_r > 0 required");
  }
  BindingSet out;
  const SplatProjection proj = project_splats(splats, cam);

  // Grid over dynamic splats only.
  std::vector<uint8_t> dyn_valid(splats.size(), 0);
  bool any_dyn = false;
  for (size_t i = 0; i < splats.size(); ++i) {
    dyn_valid[i] = proj.valid[i] && assignment.dynamic[i];
    any_dyn |= dyn_valid[i] != 0;
  }
  std::vector<int> static_indices;
  for (size_t i = 0; i < splats.size(); ++i) {
    if (!assignment.dynamic[i]) static_indices.push_back(int(i));
  }
  if (!any_dyn || static_indices.empty()) {
    out.empty_warning = true;
    return out;
  }
  const Knn2D knn(proj.pixel, dyn_valid, 8.0);

  std::set<std::pair<int, int>> seen;
  for (int pi : qs.point_indices) {
    if (!tracks.vis(pi, t_src)) continue;
    const Vec2 px = tracks.pixel(pi, t_src);
    for (const auto& [d2, dyn_idx] : knn.query(px.x(), px.y(), K)) {
      (void)d2;
      // Nearest static splat in 3D within the binding radius.
      int best = -1;
      double best_d2 = radius_r * radius_r;
      for (int si : static_indices) {
        const double d =
            (splats[size_t(dyn_idx)].mean - splats[size_t(si)].mean)
                .squaredNorm();
        if (d <= best_d2 && (best == -1 || d < best_d2)) {
          best_d2 = d;
          best = si;
        }
      }
      if (best == -1) continue;
      if (seen.emplace(dyn_idx, best).second) {
        out.pairs.push_back({dyn_idx, best, std::sqrt(best_d2)});
      }
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end(), [](const auto& a, const auto& b) {
    if (a.dynamic_index != b.dynamic_index)
      return a.dynamic_index < b.dynamic_index;
    return a.static_index < b.static_index;
  });
  out.empty_warning = out.pairs.empty();
  return out;
}

SegmentationResult run_segmentation(const ObservationBundle& bundle,
                                    const SegmentationConfig& cfg) {
  SegmentationResult result;
  const auto [t_src, t_tgt] =
      select_frame_pair(bundle.tracks, cfg.min_frame_gap);
  result.motion = classify_tracks(bundle.tracks, t_src, t_tgt,
                                  cfg.tau_dynamic, cfg.tau_static);

  std::vector<Vec2> dyn_points, static_points;
  for (int p = 0; p < bundle.tracks.n_points; ++p) {
    if (result.motion.label[size_t(p)] == MotionLabel::Dynamic) {
      dyn_points.push_back(bundle.tracks.pixel(p, t_src));
    } else if (result.motion.label[size_t(p)] == MotionLabel::Static) {
      static_points.push_back(bundle.tracks.pixel(p, t_src));
    }
  }
  if (!dyn_points.empty()) {
    result.dyn_prompts =
        cluster_prompts(dyn_points, cfg.kmeans_k, cfg.kmeans_seed);
  }
  if (!static_points.empty()) {
    result.static_prompts =
        cluster_prompts(static_points, cfg.kmeans_k, cfg.kmeans_seed + 1);
  }

  const Mask& object_mask = bundle.mask_object[size_t(t_src)];
  const Mask mask_dyn =
      dense_dynamic_mask(object_mask, result.dyn_prompts,
                         result.static_prompts);
  Mask mask_static(object_mask.width, object_mask.height, 0);
  for (size_t i = 0; i < mask_static.data.size(); ++i) {
    mask_static.data[i] = object_mask.data[i] && !mask_dyn.data[i] ? 1 : 0;
  }

  const PartAssignment raw =
      backproject_mask(mask_dyn, mask_static, bundle.splats_canonical,
                       bundle.camera, cfg.influence_k);
  result.assignment =
      refine_connectivity(raw, bundle.splats_canonical, cfg.graph_knn);

  if (!dyn_points.empty()) {
    const QuasiStaticSet qs =
        extract_quasi_static(result.motion, cfg.qs_percentile, cfg.qs_min_px);
    result.bindings = build_bindings(qs, bundle.tracks, t_src,
                                     result.assignment,
                                     bundle.splats_canonical, bundle.camera,
                                     cfg.binding_radius, cfg.influence_k);
  } else {
    result.bindings.empty_warning = true;
  }
  return result;
}

}  // namespace arthoi
