// SPDX-License-Identifier: Apache-2.0
#include "momtx/tensorgrad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Core>
#include <fmt/format.h>

#include "momtx/errors.hpp"

namespace momtx::tensorgrad {

namespace {

using ImplPtr = std::shared_ptr<detail::TensorImpl>;

void check_finite(std::string_view op, std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericalError(fmt::format("{} produced a non-finite value", op));
    }
  }
}

// Gradient buffer of an input, or nullptr when it takes no gradient.
double* grad_sink(const ImplPtr& p) {
  if (!p->requires_grad) return nullptr;
  p->ensure_grad();
  return p->grad.data();
}

struct BroadcastPlan {
  enum class Mode { kSame, kScalarA, kScalarB, kSuffixA, kSuffixB, kGeneral };
  Shape out;
  Mode mode = Mode::kSame;
  std::size_t na = 0;
  std::size_t nb = 0;
  std::vector<std::size_t> dims;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
};

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

BroadcastPlan plan_broadcast(std::string_view op, const Shape& a,
                             const Shape& b) {
  BroadcastPlan plan;
  const std::size_t rank = std::max(a.size(), b.size());
  plan.out.assign(rank, 1);
  Shape pa(rank, 1);
  Shape pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + (rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + (rank - b.size()));
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] == pb[i] || pb[i] == 1) {
      plan.out[i] = pa[i];
    } else if (pa[i] == 1) {
      plan.out[i] = pb[i];
    } else {
      throw DimensionError(fmt::format("{}: cannot broadcast {} with {}", op,
                                       to_string(a), to_string(b)));
    }
  }
  plan.na = numel(a);
  plan.nb = numel(b);
  using Mode = BroadcastPlan::Mode;
  if (pa == pb) {
    plan.mode = Mode::kSame;
  } else if (plan.nb == 1) {
    plan.mode = Mode::kScalarB;
  } else if (plan.na == 1) {
    plan.mode = Mode::kScalarA;
  } else if (pa == plan.out && is_suffix(b, plan.out) &&
             numel(b) == numel(Shape(b.begin(), b.end()))) {
    plan.mode = Mode::kSuffixB;
  } else if (pb == plan.out && is_suffix(a, plan.out)) {
    plan.mode = Mode::kSuffixA;
  } else {
    plan.mode = Mode::kGeneral;
    plan.dims = plan.out;
    plan.stride_a.assign(rank, 0);
    plan.stride_b.assign(rank, 0);
    std::size_t sa = 1;
    std::size_t sb = 1;
    for (std::size_t i = rank; i-- > 0;) {
      plan.stride_a[i] = pa[i] == 1 ? 0 : sa;
      plan.stride_b[i] = pb[i] == 1 ? 0 : sb;
      sa *= pa[i];
      sb *= pb[i];
    }
  }
  return plan;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <class F>
void for_each_broadcast(const BroadcastPlan& plan, F&& f) {
  using Mode = BroadcastPlan::Mode;
  const std::size_t n = numel(plan.out);
  switch (plan.mode) {
    case Mode::kSame:
      for (std::size_t i = 0; i < n; ++i) f(i, i, i);
      return;
    case Mode::kScalarB:
      for (std::size_t i = 0; i < n; ++i) f(i, i, std::size_t{0});
      return;
    case Mode::kScalarA:
      for (std::size_t i = 0; i < n; ++i) f(i, std::size_t{0}, i);
      return;
    case Mode::kSuffixB:
      for (std::size_t i = 0; i < n; ++i) f(i, i, i % plan.nb);
      return;
    case Mode::kSuffixA:
      for (std::size_t i = 0; i < n; ++i) f(i, i % plan.na, i);
      return;
    case Mode::kGeneral:
      break;
  }
  const std::size_t rank = plan.dims.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (std::size_t k = rank; k-- > 0;) {
      ++idx[k];
      ia += plan.stride_a[k];
      ib += plan.stride_b[k];
      if (idx[k] < plan.dims[k]) break;
      ia -= plan.stride_a[k] * plan.dims[k];
      ib -= plan.stride_b[k] * plan.dims[k];
      idx[k] = 0;
    }
  }
}


using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const double* A, const double* B, double* C, std::size_t m,
             std::size_t k, std::size_t n) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k),
             N = static_cast<Eigen::Index>(n);
  MutMap(C, M, N).noalias() += ConstMap(A, M, K) * ConstMap(B, K, N);
}

// C[m x n] += A[m x k] * B[n x k]^T
void gemm_nt(const double* A, const double* B, double* C, std::size_t m,
             std::size_t k, std::size_t n) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k),
             N = static_cast<Eigen::Index>(n);
  MutMap(C, M, N).noalias() += ConstMap(A, M, K) * ConstMap(B, N, K).transpose();
}

// C[k x n] += A[m x k]^T * B[m x n]
void gemm_tn(const double* A, const double* B, double* C, std::size_t m,
             std::size_t k, std::size_t n) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k),
             N = static_cast<Eigen::Index>(n);
  MutMap(C, K, N).noalias() += ConstMap(A, M, K).transpose() * ConstMap(B, M, N);
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string_view to_string(UnaryOp op) {
  switch (op) {
    case UnaryOp::kTanh: return "tanh";
    case UnaryOp::kSigmoid: return "sigmoid";
    case UnaryOp::kElu: return "elu";
    case UnaryOp::kExp: return "exp";
    case UnaryOp::kLog: return "log";
    case UnaryOp::kSqrt: return "sqrt";
    case UnaryOp::kNegate: return "negate";
  }
  return "?";
}

bool Tape::any_requires_grad(std::initializer_list<const Tensor*> xs) {
  return std::any_of(xs.begin(), xs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

Tensor Tape::push(std::string_view op, Tensor out, std::vector<ImplPtr> inputs,
                  std::function<void()> backward) {
  check_finite(op, out.data());
  const bool tracked = std::any_of(inputs.begin(), inputs.end(),
                                   [](const ImplPtr& p) { return p->requires_grad; });
  if (!tracked) return out;
  out.set_requires_grad(true);
  entries_.push_back(Entry{op, std::move(inputs), out.impl_, std::move(backward)});
  return out;
}

Tensor Tape::binary(std::string_view op, const Tensor& a, const Tensor& b,
                    int kind) {
  BroadcastPlan plan = plan_broadcast(op, a.shape(), b.shape());
  std::vector<double> out(numel(plan.out));
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data();
  switch (kind) {
    case 0:
      for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        po[i] = pa[ia] + pb[ib];
      });
      break;
    case 1:
      for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        po[i] = pa[ia] - pb[ib];
      });
      break;
    case 2:
      for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        po[i] = pa[ia] * pb[ib];
      });
      break;
    default:
      for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        po[i] = pa[ia] / pb[ib];
      });
      break;
  }
  Tensor result(plan.out, std::move(out));
  ImplPtr ia_ptr = a.impl_;
  ImplPtr ib_ptr = b.impl_;
  ImplPtr out_ptr = result.impl_;
  return push(op, result, {ia_ptr, ib_ptr},
              [plan = std::move(plan), ia_ptr, ib_ptr, out_ptr, kind]() {
                const double* g = out_ptr->grad.data();
                const double* va = ia_ptr->data.data();
                const double* vb = ib_ptr->data.data();
                double* ga = grad_sink(ia_ptr);
                double* gb = grad_sink(ib_ptr);
                for_each_broadcast(plan, [&](std::size_t i, std::size_t a_i,
                                             std::size_t b_i) {
                  const double gi = g[i];
                  switch (kind) {
                    case 0:
                      if (ga) ga[a_i] += gi;
                      if (gb) gb[b_i] += gi;
                      break;
                    case 1:
                      if (ga) ga[a_i] += gi;
                      if (gb) gb[b_i] -= gi;
                      break;
                    case 2:
                      if (ga) ga[a_i] += gi * vb[b_i];
                      if (gb) gb[b_i] += gi * va[a_i];
                      break;
                    default:
                      if (ga) ga[a_i] += gi / vb[b_i];
                      if (gb) gb[b_i] -= gi * va[a_i] / (vb[b_i] * vb[b_i]);
                      break;
                  }
                });
              });
}

Tensor Tape::add(const Tensor& a, const Tensor& b) { return binary("add", a, b, 0); }
Tensor Tape::sub(const Tensor& a, const Tensor& b) { return binary("sub", a, b, 1); }
Tensor Tape::mul(const Tensor& a, const Tensor& b) { return binary("mul", a, b, 2); }
Tensor Tape::div(const Tensor& a, const Tensor& b) { return binary("div", a, b, 3); }

Tensor Tape::add_scalar(const Tensor& x, double s) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v += s;
  Tensor result(x.shape(), std::move(out));
  ImplPtr in = x.impl_;
  ImplPtr o = result.impl_;
  return push("add_scalar", result, {in}, [in, o]() {
    double* g = grad_sink(in);
    for (std::size_t i = 0; i < o->grad.size(); ++i) g[i] += o->grad[i];
  });
}

Tensor Tape::mul_scalar(const Tensor& x, double s) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v *= s;
  Tensor result(x.shape(), std::move(out));
  ImplPtr in = x.impl_;
  ImplPtr o = result.impl_;
  return push("mul_scalar", result, {in}, [in, o, s]() {
    double* g = grad_sink(in);
    for (std::size_t i = 0; i < o->grad.size(); ++i) g[i] += o->grad[i] * s;
  });
}

Tensor Tape::unary(UnaryOp op, const Tensor& x) {
  const auto in_values = x.data();
  std::vector<double> out(in_values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = in_values[i];
    switch (op) {
      case UnaryOp::kTanh: out[i] = std::tanh(v); break;
      case UnaryOp::kSigmoid: out[i] = sigmoid_scalar(v); break;
      case UnaryOp::kElu: out[i] = v > 0.0 ? v : std::expm1(v); break;
      case UnaryOp::kExp: out[i] = std::exp(v); break;
      case UnaryOp::kLog:
      case UnaryOp::kSqrt:
        if (!(v > 0.0)) {
          throw DomainError(fmt::format("{} requires positive input, got {}",
                                        to_string(op), v));
        }
        out[i] = op == UnaryOp::kLog ? std::log(v) : std::sqrt(v);
        break;
      case UnaryOp::kNegate: out[i] = -v; break;
    }
  }
  Tensor result(x.shape(), std::move(out));
  ImplPtr in = x.impl_;
  ImplPtr o = result.impl_;
  return push(to_string(op), result, {in}, [in, o, op]() {
    double* g = grad_sink(in);
    const double* go = o->grad.data();
    const double* y = o->data.data();
    const double* xv = in->data.data();
    const std::size_t n = o->data.size();
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      switch (op) {
        case UnaryOp::kTanh: d = 1.0 - y[i] * y[i]; break;
        case UnaryOp::kSigmoid: d = y[i] * (1.0 - y[i]); break;
        case UnaryOp::kElu: d = xv[i] > 0.0 ? 1.0 : y[i] + 1.0; break;
        case UnaryOp::kExp: d = y[i]; break;
        case UnaryOp::kLog: d = 1.0 / xv[i]; break;
        case UnaryOp::kSqrt: d = 0.5 / y[i]; break;
        case UnaryOp::kNegate: d = -1.0; break;
      }
      g[i] += go[i] * d;
    }
  });
}

Tensor Tape::clamp_min(const Tensor& x, double floor) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v = std::max(v, floor);
  Tensor result(x.shape(), std::move(out));
  ImplPtr in = x.impl_;
  ImplPtr o = result.impl_;
  return push("clamp_min", result, {in}, [in, o, floor]() {
    double* g = grad_sink(in);
    for (std::size_t i = 0; i < o->grad.size(); ++i) {
      if (in->data[i] >= floor) g[i] += o->grad[i];
    }
  });
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  auto mismatch = [&]() {
    return DimensionError(fmt::format("matmul: incompatible shapes {} and {}{}",
                                      to_string(sa), to_string(sb),
                                      transpose_b ? " (b transposed)" : ""));
  };
  if (sa.size() < 2 || sb.size() < 2) throw mismatch();
  const std::size_t k = sa.back();
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t bk = transpose_b ? sb.back() : sb[sb.size() - 2];
  const std::size_t n = transpose_b ? sb[sb.size() - 2] : sb.back();
  if (bk != k) throw mismatch();

  Shape out_shape(sa.begin(), sa.end() - 1);
  out_shape.push_back(n);
  std::size_t batches = 1;
  std::size_t rows = m;
  bool shared_b = sb.size() == 2;
  if (shared_b) {
    rows = numel(sa) / k;
  } else {
    if (sb.size() != sa.size() ||
        !std::equal(sa.begin(), sa.end() - 2, sb.begin())) {
      throw mismatch();
    }
    batches = numel(sa) / (m * k);
  }

  std::vector<double> out(numel(out_shape), 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t bi = 0; bi < batches; ++bi) {
    const double* Ab = A + bi * rows * k;
    const double* Bb = shared_b ? B : B + bi * k * n;
    double* Cb = out.data() + bi * rows * n;
    if (transpose_b) {
      gemm_nt(Ab, Bb, Cb, rows, k, n);
    } else {
      gemm_nn(Ab, Bb, Cb, rows, k, n);
    }
  }
  Tensor result(std::move(out_shape), std::move(out));
  ImplPtr pa = a.impl_;
  ImplPtr pb = b.impl_;
  ImplPtr o = result.impl_;
  return push("matmul", result, {pa, pb},
              [pa, pb, o, batches, rows, k, n, shared_b, transpose_b]() {
                double* ga = grad_sink(pa);
                double* gb = grad_sink(pb);
                const double* G = o->grad.data();
                const double* A = pa->data.data();
                const double* B = pb->data.data();
                for (std::size_t bi = 0; bi < batches; ++bi) {
                  const double* Gb = G + bi * rows * n;
                  const double* Ab = A + bi * rows * k;
                  const std::size_t boff = shared_b ? 0 : bi * k * n;
                  if (ga) {
                    double* gab = ga + bi * rows * k;
                    if (transpose_b) {
                      gemm_nn(Gb, B + boff, gab, rows, n, k);
                    } else {
                      gemm_nt(Gb, B + boff, gab, rows, n, k);
                    }
                  }
                  if (gb) {
                    if (transpose_b) {
                      gemm_tn(Gb, Ab, gb + boff, rows, n, k);
                    } else {
                      gemm_tn(Ab, Gb, gb + boff, rows, k, n);
                    }
                  }
                }
              });
}

Tensor Tape::softmax(const Tensor& x, bool causal) {
  const Shape& s = x.shape();
  if (s.empty() || x.numel() == 0) {
    throw DimensionError("softmax: empty tensor");
  }
  const std::size_t n = s.back();
  std::size_t square = 0;
  if (causal) {
    if (s.size() < 2 || s[s.size() - 2] != n) {
      throw DimensionError("softmax: causal mask needs square trailing axes, got " +
                           to_string(s));
    }
    square = n;
  }
  const std::size_t rows = x.numel() / n;
  const double* in = x.data().data();
  std::vector<double> out(x.numel());
  std::vector<double> shifted(n);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xi = in + r * n;
    double* yi = out.data() + r * n;
    const std::size_t query = causal ? r % square : 0;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      shifted[j] = xi[j] + ((causal && j > query) ? kMaskValue : 0.0);
      mx = std::max(mx, shifted[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      yi[j] = std::exp(shifted[j] - mx);
      total += yi[j];
    }
    for (std::size_t j = 0; j < n; ++j) yi[j] /= total;
  }
  Tensor result(s, std::move(out));
  ImplPtr pi = x.impl_;
  ImplPtr o = result.impl_;
  return push(causal ? "softmax_causal" : "softmax", result, {pi},
              [pi, o, rows, n]() {
                double* g = grad_sink(pi);
                const double* y = o->data.data();
                const double* go = o->grad.data();
                for (std::size_t r = 0; r < rows; ++r) {
                  const double* yr = y + r * n;
                  const double* gr = go + r * n;
                  double dot = 0.0;
                  for (std::size_t j = 0; j < n; ++j) dot += yr[j] * gr[j];
                  double* gi = g + r * n;
                  for (std::size_t j = 0; j < n; ++j) gi[j] += yr[j] * (gr[j] - dot);
                }
              });
}

Tensor Tape::layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                        double eps) {
  const Shape& s = x.shape();
  if (s.empty() || s.back() == 0) {
    throw DimensionError("layer_norm: zero-length normalised axis");
  }
  const std::size_t d = s.back();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError(fmt::format(
        "layer_norm: gain {} / bias {} do not match normalised axis of {}",
        to_string(gain.shape()), to_string(bias.shape()), to_string(s)));
  }
  const std::size_t rows = x.numel() / d;
  const double* in = x.data().data();
  const double* gv = gain.data().data();
  const double* bv = bias.data().data();
  std::vector<double> out(x.numel());
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xi = in + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xi[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xi[j] - mu) * is;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  Tensor result(s, std::move(out));
  ImplPtr px = x.impl_;
  ImplPtr pg = gain.impl_;
  ImplPtr pb = bias.impl_;
  ImplPtr o = result.impl_;
  return push("layer_norm", result, {px, pg, pb},
              [px, pg, pb, o, xhat, inv_std, rows, d]() {
                double* gx = grad_sink(px);
                double* gg = grad_sink(pg);
                double* gb = grad_sink(pb);
                const double* go = o->grad.data();
                const double* gain_v = pg->data.data();
                const double inv_d = 1.0 / static_cast<double>(d);
                for (std::size_t r = 0; r < rows; ++r) {
                  const double* gr = go + r * d;
                  const double* hr = xhat->data() + r * d;
                  double mean_dh = 0.0;
                  double mean_dh_h = 0.0;
                  for (std::size_t j = 0; j < d; ++j) {
                    const double dh = gr[j] * gain_v[j];
                    mean_dh += dh;
                    mean_dh_h += dh * hr[j];
                    if (gg) gg[j] += gr[j] * hr[j];
                    if (gb) gb[j] += gr[j];
                  }
                  mean_dh *= inv_d;
                  mean_dh_h *= inv_d;
                  if (gx) {
                    const double is = (*inv_std)[r];
                    for (std::size_t j = 0; j < d; ++j) {
                      const double dh = gr[j] * gain_v[j];
                      gx[r * d + j] += is * (dh - mean_dh - hr[j] * mean_dh_h);
                    }
                  }
                }
              });
}

Tensor Tape::sum(const Tensor& x) {
  const auto v = x.data();
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  Tensor result = Tensor::scalar(total);
  ImplPtr in = x.impl_;
  ImplPtr o = result.impl_;
  return push("sum", result, {in}, [in, o]() {
    double* g = grad_sink(in);
    const double go = o->grad[0];
    for (std::size_t i = 0; i < in->data.size(); ++i) g[i] += go;
  });
}

Tensor Tape::mean(const Tensor& x) {
  const auto v = x.data();
  const double n = static_cast<double>(v.size());
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  Tensor result = Tensor::scalar(total / n);
  ImplPtr in = x.impl_;
  ImplPtr o = result.impl_;
  return push("mean", result, {in}, [in, o, n]() {
    double* g = grad_sink(in);
    const double go = o->grad[0] / n;
    for (std::size_t i = 0; i < in->data.size(); ++i) g[i] += go;
  });
}

Tensor Tape::reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw DimensionError(fmt::format("reshape: {} to {} changes element count",
                                     to_string(x.shape()), to_string(shape)));
  }
  Tensor result(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  ImplPtr in = x.impl_;
  ImplPtr o = result.impl_;
  return push("reshape", result, {in}, [in, o]() {
    double* g = grad_sink(in);
    for (std::size_t i = 0; i < o->grad.size(); ++i) g[i] += o->grad[i];
  });
}

Tensor Tape::slice(const Tensor& x, std::size_t axis, std::size_t start,
                   std::size_t length) {
  const Shape& s = x.shape();
  if (axis >= s.size() || length == 0 || start + length > s[axis]) {
    throw DimensionError(fmt::format("slice: [{}, {}) on axis {} of {}", start,
                                     start + length, axis, to_string(s)));
  }
  const std::size_t outer = numel(Shape(s.begin(), s.begin() + axis));
  const std::size_t inner = numel(Shape(s.begin() + axis + 1, s.end()));
  const std::size_t extent = s[axis];
  Shape out_shape = s;
  out_shape[axis] = length;
  std::vector<double> out(outer * length * inner);
  const double* in = x.data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(in + (o * extent + start) * inner, length * inner,
                out.data() + o * length * inner);
  }
  Tensor result(std::move(out_shape), std::move(out));
  ImplPtr pi = x.impl_;
  ImplPtr po = result.impl_;
  return push("slice", result, {pi},
              [pi, po, outer, inner, extent, start, length]() {
                double* g = grad_sink(pi);
                const double* go = po->grad.data();
                for (std::size_t o = 0; o < outer; ++o) {
                  double* dst = g + (o * extent + start) * inner;
                  const double* src = go + o * length * inner;
                  for (std::size_t i = 0; i < length * inner; ++i) dst[i] += src[i];
                }
              });
}

Tensor Tape::concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) {
    throw DimensionError(fmt::format("concat: axis {} out of range for {}", axis,
                                     to_string(s0)));
  }
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != axis && s[i] != s0[i]) ok = false;
    }
    if (!ok) {
      throw DimensionError(fmt::format("concat: {} incompatible with {} on axis {}",
                                       to_string(s), to_string(s0), axis));
    }
    total += s[axis];
  }
  const std::size_t outer = numel(Shape(s0.begin(), s0.begin() + axis));
  const std::size_t inner = numel(Shape(s0.begin() + axis + 1, s0.end()));
  Shape out_shape = s0;
  out_shape[axis] = total;
  std::vector<double> out(outer * total * inner);
  std::vector<ImplPtr> inputs;
  std::vector<std::size_t> extents;
  inputs.reserve(parts.size());
  for (const Tensor& p : parts) {
    inputs.push_back(p.impl_);
    extents.push_back(p.shape()[axis]);
  }
  for (std::size_t o = 0; o < outer; ++o) {
    double* dst = out.data() + o * total * inner;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const std::size_t block = extents[k] * inner;
      std::copy_n(parts[k].data().data() + o * block, block, dst);
      dst += block;
    }
  }
  Tensor result(std::move(out_shape), std::move(out));
  ImplPtr po = result.impl_;
  auto captured = inputs;
  return push("concat", result, std::move(inputs),
              [captured = std::move(captured), extents, po, outer, inner, total]() {
                const double* go = po->grad.data();
                for (std::size_t o = 0; o < outer; ++o) {
                  const double* src = go + o * total * inner;
                  for (std::size_t k = 0; k < captured.size(); ++k) {
                    const std::size_t block = extents[k] * inner;
                    if (double* g = grad_sink(captured[k])) {
                      double* dst = g + o * block;
                      for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                    }
                    src += block;
                  }
                }
              });
}

Tensor Tape::dropout(const Tensor& x, double p, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ContractError(fmt::format("dropout rate must lie in [0, 1), got {}", p));
  }
  if (p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::bernoulli_distribution keep(1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.numel());
  std::vector<double> out(x.numel());
  const auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = keep(rng) ? keep_scale : 0.0;
    out[i] = v[i] * (*mask)[i];
  }
  Tensor result(x.shape(), std::move(out));
  ImplPtr in = x.impl_;
  ImplPtr o = result.impl_;
  return push("dropout", result, {in}, [in, o, mask]() {
    double* g = grad_sink(in);
    for (std::size_t i = 0; i < o->grad.size(); ++i) g[i] += o->grad[i] * (*mask)[i];
  });
}

Tensor Tape::embedding(const Tensor& table, std::span<const int> indices) {
  if (table.rank() != 2) {
    throw DimensionError("embedding: table must be rank 2, got " +
                         to_string(table.shape()));
  }
  if (indices.empty()) throw DimensionError("embedding: no indices");
  const std::size_t rows = table.dim(0);
  const std::size_t d = table.dim(1);
  std::vector<double> out(indices.size() * d);
  const double* t = table.data().data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    if (idx < 0 || static_cast<std::size_t>(idx) >= rows) {
      throw ContractError(fmt::format("embedding: index {} outside table of {} rows",
                                      idx, rows));
    }
    std::copy_n(t + static_cast<std::size_t>(idx) * d, d, out.data() + i * d);
  }
  Tensor result({indices.size(), d}, std::move(out));
  ImplPtr pt = table.impl_;
  ImplPtr o = result.impl_;
  std::vector<int> idx(indices.begin(), indices.end());
  return push("embedding", result, {pt}, [pt, o, idx = std::move(idx), d]() {
    double* g = grad_sink(pt);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = g + static_cast<std::size_t>(idx[i]) * d;
      const double* src = o->grad.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        to_string(loss.shape()));
  }
  if (consumed_) throw ContractError("backward: tape already replayed");
  consumed_ = true;
  if (!loss.requires_grad()) return;
  loss.impl_->ensure_grad();
  loss.impl_->grad[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward();
  }
}

std::vector<RecordEntry> Tape::record() const {
  std::vector<RecordEntry> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) {
    RecordEntry r{e.op, {}, e.output->id};
    for (const ImplPtr& p : e.inputs) r.inputs.push_back(p->id);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace momtx::tensorgrad
