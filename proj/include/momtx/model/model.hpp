// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "momtx/model/layers.hpp"

namespace momtx::model {

enum class ModelKind { kLstm, kTft };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct ModelDims {
  std::size_t n_inputs = 8;     ///< m, time-varying input variables
  std::size_t d_model = 10;
  std::size_t seq_len = 63;     ///< tau
  std::size_t n_heads = 4;
  std::size_t n_static = 4;     ///< rows of the entity embedding table
  double dropout = 0.1;

  std::size_t head_dim() const { return d_model / n_heads; }
  /// Throws ConfigError.
  void validate(ModelKind kind) const;
};

struct ForwardOptions {
  std::mt19937_64* dropout_rng = nullptr;  ///< training mode when set
};

struct ForwardResult {
  Tensor positions;                   ///< [B, T], each in (-1, 1)
  Tensor vsn_weights;                 ///< [B, T, m]; TFT only
  std::vector<Tensor> attention;      ///< per head [B, T, T]; TFT only
};

/// LSTM-DMN baseline or the decoder-only TFT ("Momentum Transformer").
///
/// Parameters live in a name-ordered registry; the layer parameter structs
/// are views onto it assembled per forward pass.
class Model {
 public:
  Model(ModelKind kind, ModelDims dims, std::uint64_t seed);

  ModelKind kind() const noexcept { return kind_; }
  const ModelDims& dims() const noexcept { return dims_; }

  /// inputs is [B, seq_len, n_inputs]; static_ids holds B entity indices.
  ForwardResult forward(Tape& tape, const Tensor& inputs,
                        std::span<const int> static_ids,
                        const ForwardOptions& options = {}) const;

  std::vector<Tensor> parameters() const;
  const std::map<std::string, Tensor>& named_parameters() const noexcept { return params_; }
  const Tensor& parameter(const std::string& name) const;
  Tensor& parameter(const std::string& name);
  std::size_t parameter_count() const;

  /// Independent copy of every parameter.
  Model clone() const;

  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

  static constexpr std::uint32_t kCheckpointVersion = 1;

 private:
  Model(ModelKind kind, ModelDims dims) : kind_(kind), dims_(dims) {}

  void add(const std::string& name, tensorgrad::Shape shape, std::mt19937_64* rng,
           double fill = 0.0);
  void add_linear(const std::string& name, std::size_t in, std::size_t out,
                  std::mt19937_64& rng, bool bias = true);
  void add_grn(const std::string& name, std::size_t in, std::size_t out,
               bool context, std::mt19937_64& rng);
  void add_glu(const std::string& name, std::size_t in, std::size_t out,
               std::mt19937_64& rng);
  void add_norm(const std::string& name, std::size_t width);
  void add_lstm(const std::string& name, std::size_t in, std::size_t hidden,
                std::mt19937_64& rng);

  Linear linear_params(const std::string& name) const;
  GluParams glu_params(const std::string& name) const;
  AddNormParams norm_params(const std::string& name) const;
  GrnParams grn_params(const std::string& name) const;
  LstmParams lstm_params(const std::string& name) const;

  ForwardResult forward_lstm(Tape& tape, const Tensor& inputs,
                             const Dropout& dropout) const;
  ForwardResult forward_tft(Tape& tape, const Tensor& inputs,
                            std::span<const int> static_ids,
                            const Dropout& dropout) const;

  ModelKind kind_;
  ModelDims dims_;
  std::map<std::string, Tensor> params_;
};

}  // namespace momtx::model
