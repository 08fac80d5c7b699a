// SPDX-License-Identifier: Apache-2.0
#include "momtx/training/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "momtx/errors.hpp"
#include "momtx/marketdata/csv.hpp"
#include "momtx/tensorgrad/optim.hpp"

namespace momtx::training {

using features::FeaturePanel;
using tensorgrad::Shape;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::size_t usable_rows(const FeaturePanel& p) {
  std::size_t n = p.rows();
  while (n > 0 && !features::is_defined(p.fwd_ret[n - 1])) --n;
  return n;
}

void check_hyperparams(const HyperParams& hp) {
  if (hp.batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(hp.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(hp.dropout >= 0.0 && hp.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(hp.max_grad_norm > 0.0)) throw ConfigError("max gradient norm must be positive");
  if (hp.hidden == 0) throw ConfigError("hidden size must be positive");
}

std::size_t common_feature_count(std::span<const FeaturePanel> panels) {
  if (panels.empty()) throw ConfigError("no panels supplied");
  for (const auto& p : panels) {
    if (p.columns != panels.front().columns) {
      throw AlignmentError(fmt::format("panel {} has different columns from {}", p.asset_id,
                                       panels.front().asset_id));
    }
  }
  return panels.front().n_features();
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string HyperParams::to_json() const {
  nlohmann::ordered_json j;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["dropout"] = dropout;
  j["max_grad_norm"] = max_grad_norm;
  j["hidden"] = hidden;
  j["heads"] = heads;
  return j.dump();
}

HyperParams HyperParams::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("hyperparameters: {}", e.what()));
  }
  HyperParams hp;
  try {
    hp.batch_size = j.value("batch_size", hp.batch_size);
    hp.learning_rate = j.value("learning_rate", hp.learning_rate);
    hp.dropout = j.value("dropout", hp.dropout);
    hp.max_grad_norm = j.value("max_grad_norm", hp.max_grad_norm);
    hp.hidden = j.value("hidden", hp.hidden);
    hp.heads = j.value("heads", hp.heads);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("hyperparameters: {}", e.what()));
  }
  check_hyperparams(hp);
  return hp;
}

std::vector<HyperParams> Grid::points(ModelKind kind) const {
  std::vector<HyperParams> out;
  for (std::size_t b : batch_size) {
    for (double lr : learning_rate) {
      for (double p : dropout) {
        for (double g : max_grad_norm) {
          for (std::size_t h : hidden) {
            for (std::size_t nh : heads) {
              if (kind == ModelKind::kTft && (nh == 0 || h % nh != 0)) continue;
              out.push_back({b, lr, p, g, h, nh});
            }
          }
        }
      }
    }
  }
  return out;
}

Grid Grid::lstm() {
  return {{64, 128, 256},
          {1e-4, 1e-3, 1e-2, 1e-1},
          {0.1, 0.2, 0.3, 0.4, 0.5},
          {1e-2, 1e0, 1e2, 1e-1},
          {5, 10, 20, 40, 80, 160},
          {1}};
}

Grid Grid::tft() {
  return {{32, 64, 128},
          {1e-4, 1e-3, 1e-2, 1e-1},
          {0.1, 0.2, 0.3, 0.4, 0.5},
          {1e-2, 1e0, 1e2},
          {5, 10, 20, 40, 80, 160},
          {4}};
}

void TrainConfig::validate() const {
  if (seq_len == 0) throw ConfigError("sequence length must be positive");
  if (stride == 0) throw ConfigError("stride must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (patience == 0 || patience > max_epochs) {
    throw ConfigError("stopping patience must lie in [1, max_epochs]");
  }
  if (!(sigma_target > 0.0)) throw ConfigError("target volatility must be positive");
  if (n_static == 0) throw ConfigError("n_static must be positive");
}

TrainConfig TrainConfig::defaults(ModelKind kind) {
  TrainConfig c;
  c.kind = kind;
  c.seq_len = c.stride = kind == ModelKind::kLstm ? 63 : 252;
  return c;
}

std::vector<WindowRef> tile_windows(std::span<const FeaturePanel> panels, std::size_t seq_len,
                                    std::size_t stride) {
  if (stride == 0) throw ConfigError("stride must be at least 1");
  if (seq_len == 0) throw ConfigError("sequence length must be positive");
  std::vector<WindowRef> out;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const std::size_t n = usable_rows(panels[p]);
    if (n < seq_len) continue;
    std::vector<WindowRef> mine;
    for (std::size_t end = n;; end -= stride) {
      mine.push_back({p, end - seq_len});
      if (end < seq_len + stride) break;
    }
    out.insert(out.end(), mine.rbegin(), mine.rend());
  }
  return out;
}

Batch gather_batch(std::span<const FeaturePanel> panels, std::span<const WindowRef> windows,
                   std::size_t seq_len) {
  if (windows.empty()) throw ContractError("gather_batch: no windows");
  const std::size_t m = panels[windows.front().panel].n_features();
  const std::size_t b = windows.size();
  std::vector<double> x(b * seq_len * m), r(b * seq_len), s(b * seq_len);
  Batch batch;
  for (std::size_t i = 0; i < b; ++i) {
    const FeaturePanel& p = panels[windows[i].panel];
    if (p.n_features() != m) throw AlignmentError("gather_batch: feature count differs");
    if (windows[i].start + seq_len > p.rows()) throw ContractError("gather_batch: window past end");
    for (std::size_t t = 0; t < seq_len; ++t) {
      const std::size_t row = windows[i].start + t;
      std::copy_n(p.values.begin() + static_cast<std::ptrdiff_t>(row * m), m,
                  x.begin() + static_cast<std::ptrdiff_t>((i * seq_len + t) * m));
      r[i * seq_len + t] = p.fwd_ret[row];
      s[i * seq_len + t] = p.sigma_daily[row] * std::sqrt(features::kTradingDays);
    }
    batch.static_ids.push_back(static_cast<int>(p.asset_class));
  }
  batch.inputs = Tensor({b, seq_len, m}, std::move(x));
  batch.fwd_returns = Tensor({b, seq_len}, std::move(r));
  batch.sigma_annualised = Tensor({b, seq_len}, std::move(s));
  return batch;
}

std::vector<Batch> make_batches(std::span<const FeaturePanel> panels, std::size_t seq_len,
                                std::size_t stride, std::size_t batch_size,
                                std::mt19937_64& rng) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<WindowRef> windows = tile_windows(panels, seq_len, stride);
  std::shuffle(windows.begin(), windows.end(), rng);
  std::vector<Batch> out;
  for (std::size_t i = 0; i < windows.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, windows.size() - i);
    out.push_back(gather_batch(panels, std::span(windows).subspan(i, n), seq_len));
  }
  return out;
}

Tensor captured_returns(Tape& tape, const Tensor& positions, const Tensor& fwd_returns,
                        const Tensor& sigma_annualised, double sigma_target) {
  Tensor leverage = tape.div(Tensor::full(sigma_annualised.shape(), sigma_target),
                             sigma_annualised);
  return tape.mul(tape.mul(positions, leverage), fwd_returns);
}

Tensor sharpe_loss(Tape& tape, const Tensor& returns) {
  if (returns.numel() < 2) throw ContractError("sharpe_loss: need at least two returns");
  Tensor mean = tape.mean(returns);
  Tensor centred = tape.sub(returns, mean);
  Tensor var = tape.clamp_min(tape.mean(tape.mul(centred, centred)), kVarianceFloor);
  return tape.mul_scalar(tape.div(mean, tape.sqrt(var)),
                         -std::sqrt(features::kTradingDays));
}

FeaturePanel restrict_panel(const FeaturePanel& panel, marketdata::DateRange range) {
  FeaturePanel out;
  out.asset_id = panel.asset_id;
  out.asset_class = panel.asset_class;
  out.columns = panel.columns;
  const std::size_t m = panel.n_features();
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    if (!range.contains(panel.dates[r])) continue;
    out.dates.push_back(panel.dates[r]);
    auto row = panel.row(r);
    out.values.insert(out.values.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(m));
    out.fwd_ret.push_back(panel.fwd_ret[r]);
    out.sigma_daily.push_back(panel.sigma_daily[r]);
  }
  return out;
}

Model detached(const Model& model) {
  Model copy = model.clone();
  for (Tensor t : copy.parameters()) t.set_requires_grad(false);
  return copy;
}

namespace {

backtest::PositionSeries predict_detached(const Model& model, const FeaturePanel& panel) {
  const std::size_t tau = model.dims().seq_len, n = panel.rows();
  backtest::PositionSeries out{panel.asset_id, {}, {}};
  if (n < tau) return out;
  std::vector<WindowRef> windows;
  for (std::size_t s = 0; s < n; s += tau) windows.push_back({0, std::min(s, n - tau)});
  std::span<const FeaturePanel> one(&panel, 1);
  Batch batch = gather_batch(one, windows, tau);
  Tape tape;
  Tensor x = model.forward(tape, batch.inputs, batch.static_ids).positions;
  out.dates = panel.dates;
  out.positions.resize(n);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const std::size_t block = i * tau;
    for (std::size_t row = block; row < std::min(block + tau, n); ++row) {
      const double v = x[i * tau + (row - windows[i].start)];
      out.positions[row] = std::clamp(v, -backtest::kMaxPosition, backtest::kMaxPosition);
    }
  }
  return out;
}

}  // namespace

backtest::PositionSeries predict_positions(const Model& model, const FeaturePanel& panel) {
  return predict_detached(detached(model), panel);
}

std::vector<backtest::PositionSeries> predict_positions(const Model& model,
                                                        std::span<const FeaturePanel> panels) {
  Model frozen = detached(model);
  std::vector<backtest::PositionSeries> out;
  for (const auto& p : panels) out.push_back(predict_detached(frozen, p));
  return out;
}

double validation_sharpe(const Model& model, std::span<const FeaturePanel> panels,
                         double sigma_target) {
  auto positions = predict_positions(model, panels);
  auto port = backtest::portfolio_returns(positions, panels, sigma_target);
  if (port.returns.empty()) throw ConfigError("validation set yields no returns");
  return backtest::sharpe_ratio(port.returns);
}

TrainResult train(std::span<const FeaturePanel> train_panels,
                  std::span<const FeaturePanel> valid_panels, const HyperParams& hp,
                  const TrainConfig& config) {
  config.validate();
  check_hyperparams(hp);
  const std::size_t m = common_feature_count(train_panels);
  if (valid_panels.empty()) throw ConfigError("validation set is empty");
  if (common_feature_count(valid_panels) != m) {
    throw AlignmentError("training and validation panels have different features");
  }

  const auto started = std::chrono::steady_clock::now();
  std::mt19937_64 seeder(config.seed);
  const std::uint64_t init_seed = seeder();
  std::mt19937_64 shuffle_rng(seeder());
  std::mt19937_64 dropout_rng(seeder());

  model::ModelDims dims;
  dims.n_inputs = m;
  dims.d_model = hp.hidden;
  dims.seq_len = config.seq_len;
  dims.n_heads = hp.heads;
  dims.n_static = config.n_static;
  dims.dropout = hp.dropout;
  Model net(config.kind, dims, init_seed);
  std::vector<Tensor> params = net.parameters();
  tensorgrad::AdamConfig adam_config;
  adam_config.learning_rate = hp.learning_rate;
  tensorgrad::Adam adam(params, adam_config);

  TrainHistory history;
  std::optional<Model> best;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    auto batches = make_batches(train_panels, config.seq_len, config.stride, hp.batch_size,
                                shuffle_rng);
    if (batches.empty()) throw ConfigError("no complete training window");
    double loss_sum = 0.0;
    for (const Batch& batch : batches) {
      adam.zero_grad();
      double loss_value = 0.0;
      try {
        Tape tape;
        auto out = net.forward(tape, batch.inputs, batch.static_ids, {&dropout_rng});
        Tensor loss = sharpe_loss(tape, captured_returns(tape, out.positions, batch.fwd_returns,
                                                         batch.sigma_annualised,
                                                         config.sigma_target));
        loss_value = loss.item();
        if (!std::isfinite(loss_value)) throw NumericalError("non-finite loss");
        tape.backward(loss);
      } catch (const NumericalError& e) {
        throw TrainingDiverged(fmt::format("epoch {}: {}", epoch, e.what()));
      }
      tensorgrad::clip_grad_norm(params, hp.max_grad_norm);
      adam.step();
      loss_sum += loss_value;
    }
    history.train_loss.push_back(loss_sum / static_cast<double>(batches.size()));

    double vs;
    try {
      vs = validation_sharpe(net, valid_panels, config.sigma_target);
    } catch (const NumericalError& e) {
      throw TrainingDiverged(fmt::format("epoch {} validation: {}", epoch, e.what()));
    }
    if (!std::isfinite(vs)) throw TrainingDiverged(fmt::format("epoch {}: non-finite Sharpe", epoch));
    history.val_sharpe.push_back(vs);
    if (!best || vs > history.best_val_sharpe) {
      history.best_val_sharpe = vs;
      history.best_epoch = epoch;
      best = net.clone();
    } else if (epoch - history.best_epoch >= config.patience) {
      break;
    }
  }
  history.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(*best), std::move(history)};
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t trial) {
  return splitmix64(splitmix64(master) ^ (0xD1B54A32D192ED03ULL * (trial + 1)));
}

SearchResult random_search(const Grid& grid, std::size_t n_iter,
                           std::span<const FeaturePanel> train_panels,
                           std::span<const FeaturePanel> valid_panels,
                           const TrainConfig& config, std::uint64_t seed, std::size_t threads) {
  if (n_iter == 0) throw ConfigError("random search needs at least one iteration");
  config.validate();
  std::vector<HyperParams> points = grid.points(config.kind);
  if (points.empty()) throw ConfigError("search grid is empty");
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n = std::min(n_iter, points.size());

  std::vector<TrialRecord> trials(n);
  std::vector<std::optional<Model>> models(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      TrialRecord& rec = trials[i];
      rec.trial_id = i;
      rec.hp = points[order[i]];
      rec.seed = trial_seed(seed, i);
      TrainConfig cfg = config;
      cfg.seed = rec.seed;
      try {
        TrainResult result = train(train_panels, valid_panels, rec.hp, cfg);
        rec.val_sharpe = result.history.best_val_sharpe;
        rec.best_epoch = result.history.best_epoch;
        rec.status = "ok";
        models[i] = std::move(result.model);
      } catch (const TrainingDiverged&) {
        rec.status = "failed";
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::optional<std::size_t> winner;
  for (std::size_t i = 0; i < n; ++i) {
    if (trials[i].status != "ok") continue;
    if (!winner || trials[i].val_sharpe > trials[*winner].val_sharpe) winner = i;
  }
  if (!winner) throw SearchError(fmt::format("all {} trials failed", n));
  return {std::move(trials), *winner, std::move(*models[*winner])};
}

void write_trial_ledger(const std::filesystem::path& path, std::span<const TrialRecord> trials) {
  std::string text = "trial_id,hp_json,val_sharpe,best_epoch,status,seed\n";
  for (const auto& t : trials) {
    text += fmt::format("{},{},{},{},{},{}\n", t.trial_id, csv_quote(t.hp.to_json()),
                        t.status == "ok" ? fmt::format("{}", t.val_sharpe) : std::string(),
                        t.best_epoch, t.status, t.seed);
  }
  marketdata::write_file_atomic(path, text);
}

}  // namespace momtx::training
