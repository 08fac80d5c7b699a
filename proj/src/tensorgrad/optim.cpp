// SPDX-License-Identifier: Apache-2.0
#include "momtx/tensorgrad/optim.hpp"

#include <cmath>

namespace momtx::tensorgrad {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)) {
  state_.config = config;
  for (const Tensor& p : params_) {
    state_.first_moment.emplace_back(p.numel(), 0.0);
    state_.second_moment.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++state_.step;
  const AdamConfig& c = state_.config;
  const double t = static_cast<double>(state_.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = state_.first_moment[k];
    auto& v = state_.second_moment[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      w[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

double grad_norm(std::span<const Tensor> params) {
  double total = 0.0;
  for (const Tensor& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) total += g * g;
  }
  return std::sqrt(total);
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  const double norm = grad_norm(std::span<const Tensor>(params.data(), params.size()));
  // Rescaled gradients can land a few ulps above max_norm; those count as
  // already clipped.
  if (!(norm > max_norm * (1.0 + 1e-12))) return 1.0;
  const double factor = max_norm / norm;
  for (Tensor& p : params) {
    if (!p.has_grad()) continue;
    for (double& g : p.mutable_grad()) g *= factor;
  }
  return factor;
}

}  // namespace momtx::tensorgrad
