#include "arthoi/splat.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace arthoi {

namespace {

// Width of the smooth falloff band before the truncation radius, in sigma
// units. Keeps the kernel C1 so mean-gradients match finite differences.
constexpr double kWindowBand = 0.5;

struct ProjectedSplat {
  Vec2 pixel;
  double depth;
  double rho;  // projected footprint radius in pixels
  bool valid;
};

ProjectedSplat project_splat(const Splat& s, const PinholeCamera& cam) {
  ProjectedSplat out{Vec2::Zero(), 0.0, 0.0, false};
  const ProjectedPoint p = project(cam, s.mean);
  if (!p.valid) return out;
  out.pixel = p.pixel;
  out.depth = p.depth;
  out.rho = s.radius * cam.fx / p.depth;
  out.valid = out.rho > 0.0;
  return out;
}

// Smooth truncation window over s = d / rho: 1 below the band, cubic
// smoothstep down to 0 at the cutoff.
inline double window(double s, double s_max, double* dw_ds = nullptr) {
  const double s0 = s_max - kWindowBand;
  if (s <= s0) {
    if (dw_ds) *dw_ds = 0.0;
    return 1.0;
  }
  if (s >= s_max) {
    if (dw_ds) *dw_ds = 0.0;
    return 0.0;
  }
  const double x = (s_max - s) / kWindowBand;
  if (dw_ds) *dw_ds = -6.0 * x * (1.0 - x) / kWindowBand;
  return x * x * (3.0 - 2.0 * x);
}

inline double footprint_alpha(const Splat& s, const ProjectedSplat& ps,
                              double px, double py, double s_max) {
  const double dx = px - ps.pixel.x();
  const double dy = py - ps.pixel.y();
  const double d2 = dx * dx + dy * dy;
  const double sd = std::sqrt(d2) / ps.rho;
  if (sd >= s_max) return 0.0;
  return s.opacity * std::exp(-d2 / (2.0 * ps.rho * ps.rho)) *
         window(sd, s_max);
}

struct PixelBounds {
  int x0, x1, y0, y1;
};

PixelBounds footprint_bounds(const ProjectedSplat& ps, double s_max, int w,
                             int h) {
  const double r = s_max * ps.rho;
  PixelBounds b;
  b.x0 = std::max(0, int(std::ceil(ps.pixel.x() - r)));
  b.x1 = std::min(w - 1, int(std::floor(ps.pixel.x() + r)));
  b.y0 = std::max(0, int(std::ceil(ps.pixel.y() - r)));
  b.y1 = std::min(h - 1, int(std::floor(ps.pixel.y() + r)));
  return b;
}

std::vector<int> depth_order(const std::vector<ProjectedSplat>& proj) {
  std::vector<int> order;
  order.reserve(proj.size());
  for (int i = 0; i < int(proj.size()); ++i) {
    if (proj[i].valid) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (proj[a].depth != proj[b].depth) return proj[a].depth < proj[b].depth;
    return a < b;
  });
  return order;
}

}  // namespace

AlphaImage render_silhouette(const std::vector<Splat>& splats,
                             const PinholeCamera& cam,
                             const RenderConfig& cfg) {
  AlphaImage img(cam.width, cam.height, 0.0);
  std::vector<ProjectedSplat> proj(splats.size());
  for (size_t i = 0; i < splats.size(); ++i) {
    proj[i] = project_splat(splats[i], cam);
  }
  for (int i : depth_order(proj)) {
    const ProjectedSplat& ps = proj[i];
    const PixelBounds b =
        footprint_bounds(ps, cfg.truncation_sigmas, cam.width, cam.height);
    for (int y = b.y0; y <= b.y1; ++y) {
      for (int x = b.x0; x <= b.x1; ++x) {
        const double a =
            footprint_alpha(splats[i], ps, x, y, cfg.truncation_sigmas);
        if (a <= 0.0) continue;
        double& acc = img.at(x, y);
        acc += (1.0 - acc) * a;
      }
    }
  }
  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

DepthImage render_depth(const std::vector<Splat>& splats,
                        const PinholeCamera& cam, const RenderConfig& cfg) {
  DepthImage img(cam.width, cam.height);
  for (size_t i = 0; i < splats.size(); ++i) {
    const ProjectedSplat ps = project_splat(splats[i], cam);
    if (!ps.valid) continue;
    const PixelBounds b =
        footprint_bounds(ps, cfg.truncation_sigmas, cam.width, cam.height);
    for (int y = b.y0; y <= b.y1; ++y) {
      for (int x = b.x0; x <= b.x1; ++x) {
        const double a =
            footprint_alpha(splats[i], ps, x, y, cfg.truncation_sigmas);
        if (a <= cfg.depth_vis_threshold) continue;
        double& d = img.at(x, y);
        d = std::min(d, ps.depth);
      }
    }
  }
  return img;
}

namespace {

std::vector<Vec3> backward_impl(const std::vector<Splat>& splats,
                                const PinholeCamera& cam,
                                const AlphaImage& residual,
                                const AlphaImage* fixed_alpha,
                                const RenderConfig& cfg) {
  if (residual.width != cam.width || residual.height != cam.height) {
    throw std::invalid_argument("silhouette_backward: residual size mismatch");
  }
  std::vector<Vec3> grads(splats.size(), Vec3::Zero());
  std::vector<ProjectedSplat> proj(splats.size());
  for (size_t i = 0; i < splats.size(); ++i) {
    proj[i] = project_splat(splats[i], cam);
  }
  const std::vector<int> order = depth_order(proj);

  // Per-pixel contributor lists (splat id, alpha), front-to-back.
  struct Contrib {
    int splat;
    double alpha;
  };
  std::vector<std::vector<Contrib>> pixels(residual.size());
  for (int i : order) {
    const ProjectedSplat& ps = proj[i];
    const PixelBounds b =
        footprint_bounds(ps, cfg.truncation_sigmas, cam.width, cam.height);
    for (int y = b.y0; y <= b.y1; ++y) {
      for (int x = b.x0; x <= b.x1; ++x) {
        const double a =
            footprint_alpha(splats[i], ps, x, y, cfg.truncation_sigmas);
        if (a <= 0.0) continue;
        pixels[size_t(y) * cam.width + x].push_back({i, a});
      }
    }
  }

  // dL/dpixel-space quantities accumulated per splat.
  std::vector<Vec2> grad_pixel(splats.size(), Vec2::Zero());
  std::vector<double> grad_rho(splats.size(), 0.0);

  std::vector<double> prefix, suffix;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const auto& list = pixels[size_t(y) * cam.width + x];
      if (list.empty()) continue;
      double res = residual.at(x, y);
      if (fixed_alpha) res *= 1.0 - fixed_alpha->at(x, y);
      if (res == 0.0) continue;
      const size_t n = list.size();
      // dA/dalpha_i = prod_{j != i} (1 - alpha_j), via prefix/suffix
      // products so alpha == 1 stays finite.
      prefix.assign(n + 1, 1.0);
      suffix.assign(n + 1, 1.0);
      for (size_t k = 0; k < n; ++k) {
        prefix[k + 1] = prefix[k] * (1.0 - list[k].alpha);
      }
      for (size_t k = n; k > 0; --k) {
        suffix[k - 1] = suffix[k] * (1.0 - list[k - 1].alpha);
      }
      for (size_t k = 0; k < n; ++k) {
        const int i = list[k].splat;
        const double g_alpha = res * prefix[k] * suffix[k + 1];
        if (g_alpha == 0.0) continue;
        const ProjectedSplat& ps = proj[i];
        const double dx = x - ps.pixel.x();
        const double dy = y - ps.pixel.y();
        const double d2 = dx * dx + dy * dy;
        const double d = std::sqrt(d2);
        const double rho = ps.rho;
        const double sd = d / rho;
        double dw_ds = 0.0;
        const double w = window(sd, cfg.truncation_sigmas, &dw_ds);
        const double e = std::exp(-d2 / (2.0 * rho * rho));
        const double o = splats[i].opacity;
        // alpha = o * e * w; partials as functions of (pixel, rho).
        double coef = w / (rho * rho);
        if (dw_ds != 0.0 && d > 1e-12) coef -= dw_ds / (d * rho);
        grad_pixel[i].x() += g_alpha * o * e * dx * coef;
        grad_pixel[i].y() += g_alpha * o * e * dy * coef;
        double drho = d2 * w / (rho * rho * rho);
        if (dw_ds != 0.0) drho -= dw_ds * d / (rho * rho);
        grad_rho[i] += g_alpha * o * e * drho;
      }
    }
  }

  // Chain pixel-space gradients back to world-space means.
  const Mat3 r_wc = cam.world_to_camera.rotation.matrix();
  for (size_t i = 0; i < splats.size(); ++i) {
    if (!proj[i].valid) continue;
    const Vec3 pc = cam.to_camera(splats[i].mean);
    const double z = pc.z();
    Vec3 g_cam;
    g_cam.x() = cam.fx / z * grad_pixel[i].x();
    g_cam.y() = cam.fy / z * grad_pixel[i].y();
    g_cam.z() = -cam.fx * pc.x() / (z * z) * grad_pixel[i].x() -
                cam.fy * pc.y() / (z * z) * grad_pixel[i].y() -
                splats[i].radius * cam.fx / (z * z) * grad_rho[i];
    grads[i] = r_wc.transpose() * g_cam;
  }
  return grads;
}

}  // namespace

std::vector<Vec3> silhouette_backward(const std::vector<Splat>& splats,
                                      const PinholeCamera& cam,
                                      const AlphaImage& residual,
                                      const RenderConfig& cfg) {
  return backward_impl(splats, cam, residual, nullptr, cfg);
}

std::vector<Vec3> silhouette_backward_scaled(const std::vector<Splat>& splats,
                                             const PinholeCamera& cam,
                                             const AlphaImage& residual,
                                             const AlphaImage& fixed_alpha,
                                             const RenderConfig& cfg) {
  return backward_impl(splats, cam, residual, &fixed_alpha, cfg);
}

Mask binarize(const AlphaImage& img, double threshold) {
  Mask m(img.width, img.height, 0);
  for (size_t i = 0; i < img.data.size(); ++i) {
    m.data[i] = img.data[i] > threshold ? 1 : 0;
  }
  return m;
}

AlphaImage composite_alpha(const AlphaImage& a, const AlphaImage& b) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument("composite_alpha: size mismatch");
  }
  AlphaImage out(a.width, a.height);
  for (size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = 1.0 - (1.0 - a.data[i]) * (1.0 - b.data[i]);
  }
  return out;
}

void write_pgm(const std::string& path, const AlphaImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "P5\n" << img.width << " " << img.height << "\n255\n";
  for (double v : img.data) {
    const int byte = int(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    f.put(char(byte));
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

void write_pgm(const std::string& path, const Mask& mask) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  for (uint8_t v : mask.data) f.put(char(v ? 255 : 0));
  if (!f) throw std::runtime_error("write failed: " + path);
}

Mask read_pgm_mask(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) {
    throw std::runtime_error("bad PGM header: " + path);
  }
  f.get();  // single whitespace after header
  Mask m(w, h, 0);
  std::vector<char> buf(size_t(w) * h);
  f.read(buf.data(), buf.size());
  if (!f) throw std::runtime_error("truncated PGM: " + path);
  for (size_t i = 0; i < buf.size(); ++i) {
    m.data[i] = uint8_t(buf[i]) >= 128 ? 1 : 0;
  }
  return m;
}

}  // namespace arthoi
