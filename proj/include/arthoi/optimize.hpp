// First-order optimization kernel shared by both reconstruction stages:
// bias-corrected Adam, global gradient-norm clipping, and the central
// finite-difference checker the test suites use as a gradient oracle.

#pragma once

#include <Eigen/Core>
#include <functional>
#include <stdexcept>

namespace arthoi {

struct AdamState {
  int step = 0;
  Eigen::VectorXd m;  ///< first moment, same dimension as parameters
  Eigen::VectorXd v;  ///< second moment
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(int dim = 0)
      : m(Eigen::VectorXd::Zero(dim)), v(Eigen::VectorXd::Zero(dim)) {}
};

/// One bias-corrected Adam update, in place. Rejects non-finite gradients.
inline void adam_step(AdamState& state, Eigen::VectorXd& params,
                      const Eigen::VectorXd& grads, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: dimension mismatch");
  }
  if (!grads.allFinite()) {
    throw std::runtime_error("adam_step: non-finite gradient");
  }
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v.array().matrix() +
            (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  const Eigen::ArrayXd m_hat = state.m.array() / bc1;
  const Eigen::ArrayXd v_hat = state.v.array() / bc2;
  params.array() -= lr * m_hat / (v_hat.sqrt() + state.eps);
}

/// Adam with a per-coordinate learning rate (parameter groups flattened
/// into one vector).
inline void adam_step(AdamState& state, Eigen::VectorXd& params,
                      const Eigen::VectorXd& grads,
                      const Eigen::VectorXd& lr_per_coord) {
  if (params.size() != grads.size() || params.size() != lr_per_coord.size() ||
      params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: dimension mismatch");
  }
  if (!grads.allFinite()) {
    throw std::runtime_error("adam_step: non-finite gradient");
  }
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v +
            (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  const Eigen::ArrayXd m_hat = state.m.array() / bc1;
  const Eigen::ArrayXd v_hat = state.v.array() / bc2;
  params.array() -= lr_per_coord.array() * m_hat / (v_hat.sqrt() + state.eps);
}

/// Scales the whole gradient so its L2 norm is at most max_norm.
inline Eigen::VectorXd clip_grad_norm(const Eigen::VectorXd& grads,
                                      double max_norm = 1.0) {
  const double n = grads.norm();
  if (n <= max_norm) return grads;
  return grads * (max_norm / n);
}

/// Central-difference gradient check. Returns the max relative error over
/// coordinates, with denominator max(|analytic|, |numeric|, 1e-8).
inline double finite_diff_check(
    const std::function<double(const Eigen::VectorXd&)>& loss_fn,
    const Eigen::VectorXd& params, double h,
    const Eigen::VectorXd& analytic_grads) {
  double max_rel = 0.0;
  Eigen::VectorXd x = params;
  for (int i = 0; i < params.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = loss_fn(x);
    x[i] = x0 - h;
    const double fm = loss_fn(x);
    x[i] = x0;
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom =
        std::max({std::abs(analytic_grads[i]), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::abs(numeric - analytic_grads[i]) / denom);
  }
  return max_rel;
}

}  // namespace arthoi
