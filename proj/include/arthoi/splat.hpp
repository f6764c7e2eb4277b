// Differentiable silhouette and depth rendering of isotropic splats.
// Footprints are 2D Gaussians in pixel space, truncated by a C1 window so
// analytic mean-gradients stay consistent with finite differences.

#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "arthoi/geometry.hpp"

namespace arthoi {

/// Isotropic 3D Gaussian primitive. part_weight_dynamic is w^d in {0,1};
/// the static weight is 1 - w^d by construction.
struct Splat {
  Vec3 mean = Vec3::Zero();
  double radius = 0.01;    ///< meters, isotropic footprint scale
  double opacity = 1.0;    ///< peak footprint alpha, in [0,1]
  double part_weight_dynamic = 0.0;

  double part_weight_static() const { return 1.0 - part_weight_dynamic; }
};

template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T()) : width(w), height(h), data(size_t(w) * h, fill) {}

  T& at(int x, int y) { return data[size_t(y) * width + x]; }
  const T& at(int x, int y) const { return data[size_t(y) * width + x]; }
  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  size_t size() const { return data.size(); }
};

/// Per-pixel accumulated alpha in [0,1].
using AlphaImage = Image<double>;
/// Binary mask, 0 or 1 per pixel.
using Mask = Image<uint8_t>;

constexpr double kEmptyDepth = std::numeric_limits<double>::infinity();

/// Per-pixel depth of the nearest visible splat; kEmptyDepth where no splat
/// clears the visibility threshold.
struct DepthImage : Image<double> {
  DepthImage() = default;
  DepthImage(int w, int h) : Image<double>(w, h, kEmptyDepth) {}
  bool empty_at(int x, int y) const { return !(at(x, y) < kEmptyDepth); }
};

struct RenderConfig {
  double truncation_sigmas = 3.0;   ///< footprint cutoff in sigma units
  double alpha_threshold = 0.5;     ///< binarization level for silhouettes
  double depth_vis_threshold = 0.05;  ///< footprint alpha needed to set depth
};

/// Front-to-back alpha compositing of all splats in front of the camera.
AlphaImage render_silhouette(const std::vector<Splat>& splats,
                             const PinholeCamera& cam,
                             const RenderConfig& cfg = RenderConfig());

/// Nearest-splat depth per pixel, counting splats whose footprint alpha at
/// the pixel exceeds cfg.depth_vis_threshold.
DepthImage render_depth(const std::vector<Splat>& splats,
                        const PinholeCamera& cam,
                        const RenderConfig& cfg = RenderConfig());

/// Gradient of sum_pixels residual * alpha with respect to each splat mean.
/// `residual` must have the render dimensions.
std::vector<Vec3> silhouette_backward(const std::vector<Splat>& splats,
                                      const PinholeCamera& cam,
                                      const AlphaImage& residual,
                                      const RenderConfig& cfg = RenderConfig());

/// Same backward pass with the incoming per-pixel gradient scaled by
/// `transmittance` (used to composite a moving splat set over a fixed one:
/// total alpha factors as 1 - (1-A_moving)(1-A_fixed)).
std::vector<Vec3> silhouette_backward_scaled(
    const std::vector<Splat>& splats, const PinholeCamera& cam,
    const AlphaImage& residual, const AlphaImage& fixed_alpha,
    const RenderConfig& cfg = RenderConfig());

/// alpha > threshold fixed binarization of an accumulated alpha image.
Mask binarize(const AlphaImage& img, double threshold);

/// Composite two independently rendered alpha images (order-free).
AlphaImage composite_alpha(const AlphaImage& a, const AlphaImage& b);

/// 8-bit binary PGM (P5), row-major, value = round(alpha * 255).
void write_pgm(const std::string& path, const AlphaImage& img);
void write_pgm(const std::string& path, const Mask& mask);
Mask read_pgm_mask(const std::string& path);

}  // namespace arthoi
