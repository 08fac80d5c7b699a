// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace momtx::tensorgrad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  // Empty until something accumulates into it.
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t id = 0;

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major float64 tensor with an optional gradient buffer.
///
/// Tensor is a handle: copies share storage. Operations that build a
/// differentiable graph live on Tape; a Tensor by itself is just data.
/// A rank-0 shape ({}) holds a single scalar.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  bool defined() const noexcept { return impl_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  std::uint64_t id() const;

  /// Deep copy of the values as a new leaf (no gradient, no graph).
  Tensor clone() const;

  bool same_storage(const Tensor& other) const noexcept {
    return impl_ == other.impl_;
  }

 private:
  friend class Tape;
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}

  detail::TensorImpl& impl() const;

  std::shared_ptr<detail::TensorImpl> impl_;
};

}  // namespace momtx::tensorgrad
