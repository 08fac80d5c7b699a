// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "momtx/tensorgrad/tensor.hpp"

namespace momtx::tensorgrad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::int64_t step = 0;
  AdamConfig config;
};

/// Adam with bias correction. Parameters without a gradient buffer are
/// left untouched on a step.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config = {});

  void step();
  void zero_grad();

  const OptimizerState& state() const noexcept { return state_; }
  std::span<const Tensor> params() const noexcept { return params_; }

 private:
  std::vector<Tensor> params_;
  OptimizerState state_;
};

/// Global L2 norm over all present gradients.
double grad_norm(std::span<const Tensor> params);

/// Rescales all gradients by max_norm / norm when the global norm exceeds
/// max_norm. Returns the factor applied (1 when untouched).
double clip_grad_norm(std::span<Tensor> params, double max_norm);

}  // namespace momtx::tensorgrad
