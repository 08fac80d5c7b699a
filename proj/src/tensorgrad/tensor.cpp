// SPDX-License-Identifier: Apache-2.0
#include "momtx/tensorgrad/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "momtx/errors.hpp"

namespace momtx::tensorgrad {

namespace {

std::uint64_t next_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  return fmt::format("[{}]", fmt::join(shape, "x"));
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
  for (std::size_t extent : shape) {
    if (extent == 0) {
      throw DimensionError("tensor extents must be positive, got " +
                           to_string(shape));
    }
  }
  if (tensorgrad::numel(shape) != values.size()) {
    throw DimensionError(fmt::format("shape {} needs {} values, got {}",
                                     to_string(shape), tensorgrad::numel(shape),
                                     values.size()));
  }
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->id = next_id();
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = tensorgrad::numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

detail::TensorImpl& Tensor::impl() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError(
        fmt::format("axis {} out of range for shape {}", axis, to_string(s)));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return impl().data.size(); }

std::span<const double> Tensor::data() const { return impl().data; }

std::span<double> Tensor::mutable_data() { return impl().data; }

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + to_string(shape()));
  }
  return impl().data[0];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  impl().requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return !impl().grad.empty(); }

std::span<const double> Tensor::grad() const { return impl().grad; }

std::span<double> Tensor::mutable_grad() {
  impl().ensure_grad();
  return impl().grad;
}

void Tensor::zero_grad() {
  auto& g = impl().grad;
  std::fill(g.begin(), g.end(), 0.0);
}

std::uint64_t Tensor::id() const { return impl().id; }

Tensor Tensor::clone() const {
  return Tensor(impl().shape, impl().data);
}

}  // namespace momtx::tensorgrad
