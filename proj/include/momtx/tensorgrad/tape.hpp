// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "momtx/tensorgrad/tensor.hpp"

namespace momtx::tensorgrad {

enum class UnaryOp { kTanh, kSigmoid, kElu, kExp, kLog, kSqrt, kNegate };

std::string_view to_string(UnaryOp op);

/// Additive surrogate for -inf used by masked softmax.
inline constexpr double kMaskValue = -1e9;

/// One executed operation as seen from outside the tape.
struct RecordEntry {
  std::string_view op;
  std::vector<std::uint64_t> inputs;
  std::uint64_t output;
};

/// Computation record for one forward pass.
///
/// Every operation is a member function. When at least one input requires a
/// gradient, the operation is appended to the record together with its
/// vector-Jacobian product; otherwise it is evaluated and forgotten, so
/// inference through a Tape costs no graph memory.
///
/// Recording order is execution order, hence a valid topological order:
/// backward() replays it in reverse.
///
/// Binary elementwise operations broadcast with numpy semantics.
/// A Tape (and the tensors it produced) belongs to one thread at a time.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor div(const Tensor& a, const Tensor& b);
  Tensor add_scalar(const Tensor& x, double s);
  Tensor mul_scalar(const Tensor& x, double s);

  Tensor unary(UnaryOp op, const Tensor& x);
  Tensor tanh(const Tensor& x) { return unary(UnaryOp::kTanh, x); }
  Tensor sigmoid(const Tensor& x) { return unary(UnaryOp::kSigmoid, x); }
  Tensor elu(const Tensor& x) { return unary(UnaryOp::kElu, x); }
  Tensor exp(const Tensor& x) { return unary(UnaryOp::kExp, x); }
  Tensor log(const Tensor& x) { return unary(UnaryOp::kLog, x); }
  Tensor sqrt(const Tensor& x) { return unary(UnaryOp::kSqrt, x); }
  Tensor neg(const Tensor& x) { return unary(UnaryOp::kNegate, x); }

  /// max(x, floor); the gradient passes where x >= floor.
  Tensor clamp_min(const Tensor& x, double floor);

  /// a[..., m, k] x b[k, n] (b shared across leading axes), or batched
  /// a[B..., m, k] x b[B..., k, n] when b has the same leading axes.
  /// With transpose_b, b is read as [..., n, k].
  Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

  /// Softmax over the last axis. With causal set the last two axes must be
  /// square and entry (i, j > i) receives zero probability.
  Tensor softmax(const Tensor& x, bool causal = false);

  /// Normalise the last axis to zero mean, unit (population) deviation,
  /// then apply gain and bias of that axis's length.
  Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                    double eps = 1e-6);

  Tensor sum(const Tensor& x);
  Tensor mean(const Tensor& x);

  Tensor reshape(const Tensor& x, Shape shape);
  Tensor slice(const Tensor& x, std::size_t axis, std::size_t start,
               std::size_t length);
  Tensor concat(std::span<const Tensor> parts, std::size_t axis);

  /// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
  Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng);

  /// Rows of table[n, d] selected by index, shape [indices.size(), d].
  Tensor embedding(const Tensor& table, std::span<const int> indices);

  /// Accumulates d(loss)/d(leaf) into every leaf that requires a gradient.
  /// Can be called once per tape.
  void backward(const Tensor& loss);

  std::size_t size() const noexcept { return entries_.size(); }
  std::vector<RecordEntry> record() const;

 private:
  struct Entry {
    std::string_view op;
    std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
    std::shared_ptr<detail::TensorImpl> output;
    std::function<void()> backward;
  };

  static bool any_requires_grad(std::initializer_list<const Tensor*> xs);
  Tensor push(std::string_view op, Tensor out,
              std::vector<std::shared_ptr<detail::TensorImpl>> inputs,
              std::function<void()> backward);

  Tensor binary(std::string_view op, const Tensor& a, const Tensor& b, int kind);

  std::vector<Entry> entries_;
  bool consumed_ = false;
};

}  // namespace momtx::tensorgrad
