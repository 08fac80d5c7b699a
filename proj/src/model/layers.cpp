// SPDX-License-Identifier: Apache-2.0
#include "momtx/model/layers.hpp"

#include <cmath>

#include <fmt/format.h>

#include "momtx/errors.hpp"

namespace momtx::model {

using tensorgrad::Shape;

Tensor apply_dropout(Tape& tape, const Tensor& x, const Dropout& dropout) {
  if (!dropout.active()) return x;
  return tape.dropout(x, dropout.rate, *dropout.rng);
}

Tensor linear(Tape& tape, const Tensor& x, const Linear& p) {
  if (p.weight.rank() != 2 || x.rank() == 0 || x.shape().back() != p.weight.dim(0)) {
    throw DimensionError(fmt::format("linear: input {} against weight {}",
                                     tensorgrad::to_string(x.shape()),
                                     tensorgrad::to_string(p.weight.shape())));
  }
  Tensor y = tape.matmul(x, p.weight);
  if (p.bias.defined()) y = tape.add(y, p.bias);
  return y;
}

Tensor glu(Tape& tape, const Tensor& x, const GluParams& p,
           const Dropout& dropout) {
  Tensor xd = apply_dropout(tape, x, dropout);
  return tape.mul(linear(tape, xd, p.value),
                  tape.sigmoid(linear(tape, xd, p.gate)));
}

Tensor add_norm(Tape& tape, const Tensor& skip, const Tensor& x,
                const AddNormParams& p) {
  if (skip.shape() != x.shape()) {
    throw DimensionError(fmt::format("add_norm: {} vs {}",
                                     tensorgrad::to_string(skip.shape()),
                                     tensorgrad::to_string(x.shape())));
  }
  return tape.layer_norm(tape.add(skip, x), p.gain, p.bias);
}

Tensor grn(Tape& tape, const Tensor& x, const Tensor* context,
           const GrnParams& p, const Dropout& dropout) {
  if (context != nullptr && !p.has_context()) {
    throw ContractError("grn: context supplied to a GRN without a context input");
  }
  Tensor hidden = linear(tape, x, p.fc1);
  if (context != nullptr) hidden = tape.add(hidden, linear(tape, *context, p.context));
  hidden = linear(tape, tape.elu(hidden), p.fc2);
  Tensor gated = glu(tape, hidden, p.glu, dropout);
  Tensor skip = p.skip.weight.defined() ? linear(tape, x, p.skip) : x;
  return add_norm(tape, skip, gated, p.norm);
}

VsnOutput variable_selection(Tape& tape, const Tensor& xi,
                             const Tensor* static_context, const VsnParams& p,
                             const Dropout& dropout) {
  if (p.variables.empty()) throw ContractError("variable_selection: no variables");
  if (xi.rank() != 4 || xi.dim(2) != p.variables.size()) {
    throw DimensionError(fmt::format("variable_selection: input {} for {} variables",
                                     tensorgrad::to_string(xi.shape()),
                                     p.variables.size()));
  }
  const std::size_t b = xi.dim(0), t = xi.dim(1), m = xi.dim(2), d = xi.dim(3);

  Tensor flat = tape.reshape(xi, Shape{b, t, m * d});
  Tensor scores = grn(tape, flat, static_context, p.selection, dropout);
  Tensor weights = tape.softmax(scores);

  std::vector<Tensor> processed;
  processed.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    Tensor xj = tape.reshape(tape.slice(xi, 2, j, 1), Shape{b, t, d});
    Tensor yj = grn(tape, xj, nullptr, p.variables[j], dropout);
    processed.push_back(tape.reshape(yj, Shape{b, t, 1, yj.dim(2)}));
  }
  Tensor stacked = tape.concat(processed, 2);
  Tensor combined = tape.matmul(tape.reshape(weights, Shape{b, t, 1, m}), stacked);
  return {tape.reshape(combined, Shape{b, t, stacked.dim(3)}), weights};
}

Tensor lstm_forward(Tape& tape, const Tensor& seq, const LstmParams& p,
                    const Tensor* h0, const Tensor* c0) {
  const std::size_t d = p.hidden();
  if (seq.rank() != 3 || p.input_weight.rank() != 2 ||
      p.input_weight.dim(0) != seq.dim(2) || p.input_weight.dim(1) != 4 * d ||
      p.recurrent_weight.dim(1) != 4 * d || p.bias.numel() != 4 * d) {
    throw DimensionError(fmt::format("lstm_forward: sequence {} against input weight {}",
                                     tensorgrad::to_string(seq.shape()),
                                     tensorgrad::to_string(p.input_weight.shape())));
  }
  const std::size_t b = seq.dim(0), steps = seq.dim(1);
  Tensor projected = tape.add(tape.matmul(seq, p.input_weight), p.bias);
  Tensor h = h0 != nullptr ? *h0 : Tensor::zeros({b, d});
  Tensor c = c0 != nullptr ? *c0 : Tensor::zeros({b, d});
  if (h.shape() != Shape{b, d} || c.shape() != Shape{b, d}) {
    throw DimensionError("lstm_forward: initial state shape");
  }

  std::vector<Tensor> outputs;
  outputs.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    Tensor xs = tape.reshape(tape.slice(projected, 1, s, 1), Shape{b, 4 * d});
    Tensor gates = tape.add(xs, tape.matmul(h, p.recurrent_weight));
    Tensor in_gate = tape.sigmoid(tape.slice(gates, 1, 0, d));
    Tensor forget_gate = tape.sigmoid(tape.slice(gates, 1, d, d));
    Tensor candidate = tape.tanh(tape.slice(gates, 1, 2 * d, d));
    Tensor out_gate = tape.sigmoid(tape.slice(gates, 1, 3 * d, d));
    c = tape.add(tape.mul(forget_gate, c), tape.mul(in_gate, candidate));
    h = tape.mul(out_gate, tape.tanh(c));
    outputs.push_back(tape.reshape(h, Shape{b, 1, d}));
  }
  return tape.concat(outputs, 1);
}

AttentionOutput scaled_dot_attention(Tape& tape, const Tensor& q,
                                     const Tensor& k, const Tensor& v,
                                     bool causal, std::size_t d_model) {
  if (q.rank() < 2 || q.shape() != k.shape() || v.rank() != q.rank() ||
      v.dim(v.rank() - 2) != k.dim(k.rank() - 2)) {
    throw DimensionError(fmt::format("scaled_dot_attention: Q {} K {} V {}",
                                     tensorgrad::to_string(q.shape()),
                                     tensorgrad::to_string(k.shape()),
                                     tensorgrad::to_string(v.shape())));
  }
  if (d_model == 0) throw ConfigError("scaled_dot_attention: d_model must be positive");
  Tensor scores = tape.mul_scalar(tape.matmul(q, k, true),
                                  1.0 / std::sqrt(static_cast<double>(d_model)));
  Tensor weights = tape.softmax(scores, causal);
  return {tape.matmul(weights, v), weights};
}

ImhaOutput imha(Tape& tape, const Tensor& theta, const ImhaParams& p,
                bool causal) {
  const std::size_t heads = p.heads();
  if (heads == 0 || p.key.size() != heads) {
    throw ConfigError("imha: need matching query and key maps for at least one head");
  }
  if (theta.rank() != 3) throw DimensionError("imha: input must be [B, T, d_model]");
  const std::size_t d_model = theta.dim(2);
  if (d_model % heads != 0) {
    throw ConfigError(fmt::format("imha: d_model {} not divisible by {} heads", d_model, heads));
  }

  ImhaOutput out;
  out.values = linear(tape, theta, p.value);
  Tensor total;
  for (std::size_t i = 0; i < heads; ++i) {
    auto head = scaled_dot_attention(tape, linear(tape, theta, p.query[i]),
                                     linear(tape, theta, p.key[i]), out.values,
                                     causal, d_model);
    total = i == 0 ? head.output : tape.add(total, head.output);
    out.weights.push_back(head.weights);
  }
  total = tape.mul_scalar(total, 1.0 / static_cast<double>(heads));
  out.output = linear(tape, total, p.output);
  return out;
}

}  // namespace momtx::model
