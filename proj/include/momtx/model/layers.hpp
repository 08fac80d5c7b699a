// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <vector>

#include "momtx/tensorgrad/tape.hpp"
#include "momtx/tensorgrad/tensor.hpp"

namespace momtx::model {

using tensorgrad::Tape;
using tensorgrad::Tensor;

/// Dropout switch for one forward pass. Inactive without an RNG.
struct Dropout {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;

  bool active() const noexcept { return rng != nullptr && rate > 0.0; }
};

Tensor apply_dropout(Tape& tape, const Tensor& x, const Dropout& dropout);

/// y = x W + b over the last axis. weight is [in, out]; bias may be undefined.
struct Linear {
  Tensor weight;
  Tensor bias;
};

Tensor linear(Tape& tape, const Tensor& x, const Linear& p);

struct GluParams {
  Linear value;
  Linear gate;
};

/// (W1 x + b1) * sigmoid(W2 x + b2), with dropout applied to x first.
Tensor glu(Tape& tape, const Tensor& x, const GluParams& p,
           const Dropout& dropout = {});

struct AddNormParams {
  Tensor gain;
  Tensor bias;
};

/// layer_norm(skip + x).
Tensor add_norm(Tape& tape, const Tensor& skip, const Tensor& x,
                const AddNormParams& p);

struct GrnParams {
  Linear fc1;
  Linear context;  ///< no bias; weight undefined when the GRN takes no context
  Linear fc2;
  GluParams glu;
  Linear skip;     ///< weight undefined when input and output widths agree
  AddNormParams norm;

  bool has_context() const noexcept { return context.weight.defined(); }
};

/// Gated residual network:
///   eta2 = ELU(fc1(x) + context W_c), eta1 = fc2(eta2),
///   out  = layer_norm(skip(x) + GLU(eta1)).
/// context broadcasts against the leading axes of x.
Tensor grn(Tape& tape, const Tensor& x, const Tensor* context,
           const GrnParams& p, const Dropout& dropout = {});

struct VsnParams {
  std::vector<GrnParams> variables;
  GrnParams selection;
};

struct VsnOutput {
  Tensor combined;  ///< [..., d_model]
  Tensor weights;   ///< [..., m]
};

/// xi is [B, T, m, d]; the static context (if any) is [B, 1, d].
VsnOutput variable_selection(Tape& tape, const Tensor& xi,
                             const Tensor* static_context, const VsnParams& p,
                             const Dropout& dropout = {});

/// Gate order along the 4·d axis: input, forget, cell candidate, output.
struct LstmParams {
  Tensor input_weight;      ///< [in, 4d]
  Tensor recurrent_weight;  ///< [d, 4d]
  Tensor bias;              ///< [4d]

  std::size_t hidden() const { return recurrent_weight.dim(0); }
};

/// seq is [B, T, in]; returns hidden states [B, T, d]. Zero initial state
/// when h0 / c0 are null.
Tensor lstm_forward(Tape& tape, const Tensor& seq, const LstmParams& p,
                    const Tensor* h0 = nullptr, const Tensor* c0 = nullptr);

struct AttentionOutput {
  Tensor output;
  Tensor weights;
};

/// softmax(Q K^T / sqrt(d_model)) V over the last two axes.
AttentionOutput scaled_dot_attention(Tape& tape, const Tensor& q,
                                     const Tensor& k, const Tensor& v,
                                     bool causal, std::size_t d_model);

/// Interpretable multi-head attention: per-head query and key maps, a single
/// value map shared by every head, head outputs averaged and mapped by W^H.
struct ImhaParams {
  std::vector<Linear> query;
  std::vector<Linear> key;
  Linear value;
  Linear output;

  std::size_t heads() const noexcept { return query.size(); }
};

struct ImhaOutput {
  Tensor output;                ///< [B, T, d_model]
  Tensor values;                ///< shared V W^V, [B, T, d_att]
  std::vector<Tensor> weights;  ///< per head, [B, T, T]
};

ImhaOutput imha(Tape& tape, const Tensor& theta, const ImhaParams& p,
                bool causal = true);

}  // namespace momtx::model
