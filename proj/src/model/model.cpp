// SPDX-License-Identifier: Apache-2.0
#include "momtx/model/model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "momtx/errors.hpp"
#include "momtx/marketdata/csv.hpp"

namespace momtx::model {

using tensorgrad::Shape;

namespace {

constexpr std::array<char, 8> kMagic{'M', 'O', 'M', 'T', 'X', 'C', 'K', 'P'};

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get() {
    T value;
    take(&value, sizeof(T));
    return value;
  }

  void take(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint: truncated file");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::kLstm ? "lstm" : "tft";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "lstm") return ModelKind::kLstm;
  if (text == "tft") return ModelKind::kTft;
  throw ConfigError(fmt::format("unknown model kind '{}'", text));
}

void ModelDims::validate(ModelKind kind) const {
  if (n_inputs == 0) throw ConfigError("model needs at least one input variable");
  if (d_model == 0) throw ConfigError("d_model must be positive");
  if (seq_len == 0) throw ConfigError("sequence length must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (kind == ModelKind::kTft) {
    if (n_heads == 0 || d_model % n_heads != 0) {
      throw ConfigError(fmt::format("d_model {} not divisible by {} heads", d_model, n_heads));
    }
    if (n_static == 0) throw ConfigError("entity embedding needs at least one row");
  }
}

Model::Model(ModelKind kind, ModelDims dims, std::uint64_t seed)
    : kind_(kind), dims_(dims) {
  dims_.validate(kind_);
  std::mt19937_64 rng(seed);
  const std::size_t m = dims_.n_inputs, d = dims_.d_model;
  if (kind_ == ModelKind::kLstm) {
    add_linear("input", m, d, rng);
    add_lstm("lstm", d, d, rng);
    add_linear("output", d, 1, rng);
    return;
  }
  add("input.weight", {m, d}, &rng);
  add("input.bias", {m, d}, nullptr);
  add("static.embedding", {dims_.n_static, d}, &rng);
  add_grn("static_vsn", d, d, false, rng);
  add_grn("static_enrich", d, d, false, rng);
  for (std::size_t j = 0; j < m; ++j) add_grn(fmt::format("vsn.var{}", j), d, d, false, rng);
  add_grn("vsn.selection", m * d, m, true, rng);
  add_lstm("lstm", d, d, rng);
  add_glu("post_lstm.glu", d, d, rng);
  add_norm("post_lstm.norm", d);
  add_grn("enrich", d, d, true, rng);
  const std::size_t da = dims_.head_dim();
  for (std::size_t i = 0; i < dims_.n_heads; ++i) {
    add_linear(fmt::format("attn.query{}", i), d, da, rng, false);
    add_linear(fmt::format("attn.key{}", i), d, da, rng, false);
  }
  add_linear("attn.value", d, da, rng, false);
  add_linear("attn.output", da, d, rng, false);
  add_glu("post_attn.glu", d, d, rng);
  add_norm("post_attn.norm", d);
  add_grn("feedforward", d, d, false, rng);
  add_glu("output_gate.glu", d, d, rng);
  add_norm("output_gate.norm", d);
  add_linear("output", d, 1, rng);
}

void Model::add(const std::string& name, Shape shape, std::mt19937_64* rng,
                double fill) {
  Tensor t = Tensor::full(shape, fill);
  if (rng != nullptr) {
    const double fan_in = static_cast<double>(shape.size() > 1 ? shape[0] : 1);
    const double fan_out = static_cast<double>(shape.back());
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& v : t.mutable_data()) v = u(*rng);
  }
  t.set_requires_grad(true);
  params_.emplace(name, std::move(t));
}

void Model::add_linear(const std::string& name, std::size_t in, std::size_t out,
                       std::mt19937_64& rng, bool bias) {
  add(name + ".weight", {in, out}, &rng);
  if (bias) add(name + ".bias", {out}, nullptr);
}

void Model::add_glu(const std::string& name, std::size_t in, std::size_t out,
                    std::mt19937_64& rng) {
  add_linear(name + ".value", in, out, rng);
  add_linear(name + ".gate", in, out, rng);
}

void Model::add_norm(const std::string& name, std::size_t width) {
  add(name + ".gain", {width}, nullptr, 1.0);
  add(name + ".bias", {width}, nullptr);
}

void Model::add_grn(const std::string& name, std::size_t in, std::size_t out,
                    bool context, std::mt19937_64& rng) {
  const std::size_t d = dims_.d_model;
  add_linear(name + ".fc1", in, d, rng);
  if (context) add_linear(name + ".context", d, d, rng, false);
  add_linear(name + ".fc2", d, d, rng);
  add_glu(name + ".glu", d, out, rng);
  if (in != out) add_linear(name + ".skip", in, out, rng);
  add_norm(name + ".norm", out);
}

void Model::add_lstm(const std::string& name, std::size_t in, std::size_t hidden,
                     std::mt19937_64& rng) {
  add(name + ".input_weight", {in, 4 * hidden}, &rng);
  add(name + ".recurrent_weight", {hidden, 4 * hidden}, &rng);
  add(name + ".bias", {4 * hidden}, nullptr);
  auto bias = params_.at(name + ".bias").mutable_data();
  for (std::size_t i = hidden; i < 2 * hidden; ++i) bias[i] = 1.0;
}

const Tensor& Model::parameter(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError(fmt::format("no parameter named '{}'", name));
  return it->second;
}

Tensor& Model::parameter(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError(fmt::format("no parameter named '{}'", name));
  return it->second;
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(t);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

Model Model::clone() const {
  Model copy(kind_, dims_);
  for (const auto& [name, t] : params_) {
    Tensor c = t.clone();
    c.set_requires_grad(t.requires_grad());
    copy.params_.emplace(name, std::move(c));
  }
  return copy;
}

Linear Model::linear_params(const std::string& name) const {
  Linear p{parameter(name + ".weight"), {}};
  if (auto it = params_.find(name + ".bias"); it != params_.end()) p.bias = it->second;
  return p;
}

GluParams Model::glu_params(const std::string& name) const {
  return {linear_params(name + ".value"), linear_params(name + ".gate")};
}

AddNormParams Model::norm_params(const std::string& name) const {
  return {parameter(name + ".gain"), parameter(name + ".bias")};
}

GrnParams Model::grn_params(const std::string& name) const {
  GrnParams p;
  p.fc1 = linear_params(name + ".fc1");
  if (params_.count(name + ".context.weight") != 0) p.context = linear_params(name + ".context");
  p.fc2 = linear_params(name + ".fc2");
  p.glu = glu_params(name + ".glu");
  if (params_.count(name + ".skip.weight") != 0) p.skip = linear_params(name + ".skip");
  p.norm = norm_params(name + ".norm");
  return p;
}

LstmParams Model::lstm_params(const std::string& name) const {
  return {parameter(name + ".input_weight"), parameter(name + ".recurrent_weight"),
          parameter(name + ".bias")};
}

ForwardResult Model::forward(Tape& tape, const Tensor& inputs,
                             std::span<const int> static_ids,
                             const ForwardOptions& options) const {
  if (inputs.rank() != 3 || inputs.dim(2) != dims_.n_inputs) {
    throw DimensionError(fmt::format("model input {} does not match {} variables",
                                     tensorgrad::to_string(inputs.shape()), dims_.n_inputs));
  }
  if (inputs.dim(1) != dims_.seq_len) {
    throw ContractError(fmt::format("window of length {} where the model expects {}",
                                    inputs.dim(1), dims_.seq_len));
  }
  if (static_ids.size() != inputs.dim(0)) {
    throw DimensionError("one static id per batch element required");
  }
  for (int id : static_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= dims_.n_static) {
      throw ContractError(fmt::format("static id {} outside the embedding table", id));
    }
  }
  Dropout dropout{dims_.dropout, options.dropout_rng};
  return kind_ == ModelKind::kLstm ? forward_lstm(tape, inputs, dropout)
                                   : forward_tft(tape, inputs, static_ids, dropout);
}

ForwardResult Model::forward_lstm(Tape& tape, const Tensor& inputs,
                                  const Dropout& dropout) const {
  Tensor x = linear(tape, inputs, linear_params("input"));
  Tensor h = lstm_forward(tape, x, lstm_params("lstm"));
  h = apply_dropout(tape, h, dropout);
  Tensor y = tape.tanh(linear(tape, h, linear_params("output")));
  ForwardResult out;
  out.positions = tape.reshape(y, Shape{inputs.dim(0), inputs.dim(1)});
  return out;
}

ForwardResult Model::forward_tft(Tape& tape, const Tensor& inputs,
                                 std::span<const int> static_ids,
                                 const Dropout& dropout) const {
  const std::size_t b = inputs.dim(0), t = inputs.dim(1), m = dims_.n_inputs,
                    d = dims_.d_model;

  Tensor xi = tape.mul(tape.reshape(inputs, Shape{b, t, m, 1}), parameter("input.weight"));
  xi = tape.add(xi, parameter("input.bias"));

  Tensor entity = tape.embedding(parameter("static.embedding"), static_ids);
  Tensor ctx_vsn = tape.reshape(grn(tape, entity, nullptr, grn_params("static_vsn"), dropout),
                                Shape{b, 1, d});
  Tensor ctx_enrich = tape.reshape(
      grn(tape, entity, nullptr, grn_params("static_enrich"), dropout), Shape{b, 1, d});

  VsnParams vsn;
  for (std::size_t j = 0; j < m; ++j) vsn.variables.push_back(grn_params(fmt::format("vsn.var{}", j)));
  vsn.selection = grn_params("vsn.selection");
  VsnOutput selected = variable_selection(tape, xi, &ctx_vsn, vsn, dropout);

  Tensor lstm_out = lstm_forward(tape, selected.combined, lstm_params("lstm"));
  Tensor temporal = model::add_norm(tape, selected.combined,
                             glu(tape, lstm_out, glu_params("post_lstm.glu"), dropout),
                             norm_params("post_lstm.norm"));

  Tensor enriched = grn(tape, temporal, &ctx_enrich, grn_params("enrich"), dropout);

  ImhaParams attn;
  for (std::size_t i = 0; i < dims_.n_heads; ++i) {
    attn.query.push_back(linear_params(fmt::format("attn.query{}", i)));
    attn.key.push_back(linear_params(fmt::format("attn.key{}", i)));
  }
  attn.value = linear_params("attn.value");
  attn.output = linear_params("attn.output");
  ImhaOutput attended = imha(tape, enriched, attn, true);

  Tensor post_attn = model::add_norm(tape, enriched,
                              glu(tape, attended.output, glu_params("post_attn.glu"), dropout),
                              norm_params("post_attn.norm"));
  Tensor ff = grn(tape, post_attn, nullptr, grn_params("feedforward"), dropout);
  Tensor decoded = model::add_norm(tape, temporal,
                            glu(tape, ff, glu_params("output_gate.glu"), dropout),
                            norm_params("output_gate.norm"));
  Tensor y = tape.tanh(linear(tape, decoded, linear_params("output")));

  ForwardResult out;
  out.positions = tape.reshape(y, Shape{b, t});
  out.vsn_weights = selected.weights;
  out.attention = std::move(attended.weights);
  return out;
}

void Model::save(const std::filesystem::path& path) const {
  std::string bytes(kMagic.begin(), kMagic.end());
  put<std::uint32_t>(bytes, kCheckpointVersion);
  put<std::uint32_t>(bytes, kind_ == ModelKind::kLstm ? 0u : 1u);
  for (std::size_t v : {dims_.n_inputs, dims_.d_model, dims_.seq_len, dims_.n_heads,
                        dims_.n_static}) {
    put<std::uint64_t>(bytes, v);
  }
  put<double>(bytes, dims_.dropout);
  put<std::uint64_t>(bytes, params_.size());
  for (const auto& [name, t] : params_) {
    put<std::uint64_t>(bytes, name.size());
    bytes.append(name);
    put<std::uint64_t>(bytes, t.rank());
    for (std::size_t s : t.shape()) put<std::uint64_t>(bytes, s);
    for (double v : t.data()) put<double>(bytes, v);
  }
  marketdata::write_file_atomic(path, bytes);
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open checkpoint {}", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  Reader r(buffer.str());

  std::array<char, 8> magic{};
  r.take(magic.data(), magic.size());
  if (magic != kMagic) throw DataError(fmt::format("{} is not a checkpoint", path.string()));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError(fmt::format("unsupported checkpoint version {}", version));
  }
  const auto kind_code = r.get<std::uint32_t>();
  if (kind_code > 1) throw DataError("checkpoint: unknown model kind");
  const ModelKind kind = kind_code == 0 ? ModelKind::kLstm : ModelKind::kTft;
  ModelDims dims;
  dims.n_inputs = r.get<std::uint64_t>();
  dims.d_model = r.get<std::uint64_t>();
  dims.seq_len = r.get<std::uint64_t>();
  dims.n_heads = r.get<std::uint64_t>();
  dims.n_static = r.get<std::uint64_t>();
  dims.dropout = r.get<double>();

  Model model(kind, dims, 0);
  const auto count = r.get<std::uint64_t>();
  if (count != model.params_.size()) throw DataError("checkpoint: parameter count mismatch");
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name(r.get<std::uint64_t>(), '\0');
    r.take(name.data(), name.size());
    auto it = model.params_.find(name);
    if (it == model.params_.end()) {
      throw DataError(fmt::format("checkpoint: unexpected parameter '{}'", name));
    }
    Shape shape(r.get<std::uint64_t>());
    for (auto& s : shape) s = r.get<std::uint64_t>();
    if (shape != it->second.shape()) {
      throw DataError(fmt::format("checkpoint: shape mismatch for '{}'", name));
    }
    auto data = it->second.mutable_data();
    r.take(data.data(), data.size() * sizeof(double));
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes");
  return model;
}

}  // namespace momtx::model
