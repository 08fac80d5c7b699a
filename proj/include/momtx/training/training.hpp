// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "momtx/backtest/backtest.hpp"
#include "momtx/features/features.hpp"
#include "momtx/marketdata/splits.hpp"
#include "momtx/model/model.hpp"

namespace momtx::training {

using model::Model;
using model::ModelKind;
using tensorgrad::Tape;
using tensorgrad::Tensor;

struct HyperParams {
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double dropout = 0.1;
  double max_grad_norm = 1.0;
  std::size_t hidden = 10;
  std::size_t heads = 4;

  /// Compact single-line JSON with a fixed key order.
  std::string to_json() const;
  static HyperParams from_json(const std::string& text);

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

/// Cartesian search grid. Points whose hidden size is not divisible by the
/// head count are left out for the TFT.
struct Grid {
  std::vector<std::size_t> batch_size;
  std::vector<double> learning_rate;
  std::vector<double> dropout;
  std::vector<double> max_grad_norm;
  std::vector<std::size_t> hidden;
  std::vector<std::size_t> heads;

  std::vector<HyperParams> points(ModelKind kind) const;

  static Grid lstm();
  static Grid tft();
  static Grid for_kind(ModelKind kind) { return kind == ModelKind::kLstm ? lstm() : tft(); }
};

struct TrainConfig {
  ModelKind kind = ModelKind::kLstm;
  std::size_t seq_len = 63;
  std::size_t stride = 63;
  std::size_t max_epochs = 300;
  std::size_t patience = 25;
  std::uint64_t seed = 0;
  double sigma_target = backtest::kSigmaTarget;
  std::size_t n_static = marketdata::kNumAssetClasses;

  /// Throws ConfigError.
  void validate() const;
  static TrainConfig defaults(ModelKind kind);
};

/// Mini-batch of (asset, window) pairs.
struct Batch {
  Tensor inputs;            ///< [B, tau, m]
  Tensor fwd_returns;       ///< [B, tau]
  Tensor sigma_annualised;  ///< [B, tau]
  std::vector<int> static_ids;

  std::size_t size() const noexcept { return static_ids.size(); }
};

struct WindowRef {
  std::size_t panel = 0;
  std::size_t start = 0;
};

/// Window starts every `stride` rows counted back from the last row with a
/// defined forward return, per panel, in ascending order.
std::vector<WindowRef> tile_windows(std::span<const features::FeaturePanel> panels,
                                    std::size_t seq_len, std::size_t stride);

Batch gather_batch(std::span<const features::FeaturePanel> panels,
                   std::span<const WindowRef> windows, std::size_t seq_len);

/// Windows shuffled with `rng`, then grouped; the last batch may be smaller.
std::vector<Batch> make_batches(std::span<const features::FeaturePanel> panels,
                                std::size_t seq_len, std::size_t stride,
                                std::size_t batch_size, std::mt19937_64& rng);

/// R = X * sigma_target / sigma * r on the tape.
Tensor captured_returns(Tape& tape, const Tensor& positions, const Tensor& fwd_returns,
                        const Tensor& sigma_annualised,
                        double sigma_target = backtest::kSigmaTarget);

inline constexpr double kVarianceFloor = 1e-9;

/// -sqrt(252) * mean(R) / sqrt(max(var(R), floor)), population variance over
/// every entry.
Tensor sharpe_loss(Tape& tape, const Tensor& returns);

/// Panel rows whose dates fall in the range.
features::FeaturePanel restrict_panel(const features::FeaturePanel& panel,
                                      marketdata::DateRange range);

/// Copy with gradients switched off, for evaluation passes.
Model detached(const Model& model);

/// Positions for every row of the panel (dropout off). Rows are covered by
/// consecutive blocks of seq_len; the final block is anchored at the last
/// row. Panels shorter than seq_len give an empty series.
backtest::PositionSeries predict_positions(const Model& model,
                                           const features::FeaturePanel& panel);
std::vector<backtest::PositionSeries> predict_positions(
    const Model& model, std::span<const features::FeaturePanel> panels);

/// Annualised Sharpe of the equal-weighted portfolio over the panels.
/// Throws ConfigError when no panel yields a return.
double validation_sharpe(const Model& model, std::span<const features::FeaturePanel> panels,
                         double sigma_target = backtest::kSigmaTarget);

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_sharpe;
  std::size_t best_epoch = 0;  ///< 1-based
  double best_val_sharpe = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  Model model;
  TrainHistory history;
};

/// Adam on the Sharpe loss with gradient clipping and early stopping on the
/// validation Sharpe. Returns the parameters of the best epoch. Throws
/// TrainingDiverged on a non-finite loss.
TrainResult train(std::span<const features::FeaturePanel> train_panels,
                  std::span<const features::FeaturePanel> valid_panels,
                  const HyperParams& hp, const TrainConfig& config);

struct TrialRecord {
  std::size_t trial_id = 0;
  HyperParams hp;
  double val_sharpe = 0.0;
  std::size_t best_epoch = 0;
  std::string status;  ///< "ok" or "failed"
  std::uint64_t seed = 0;
};

struct SearchResult {
  std::vector<TrialRecord> trials;
  std::size_t best_trial = 0;
  Model best_model;
};

std::uint64_t trial_seed(std::uint64_t master, std::size_t trial);

/// Random grid search without replacement. Trials run on `threads` workers;
/// the winner has the highest validation Sharpe, ties going to the lower
/// trial id. Throws SearchError when every trial fails.
SearchResult random_search(const Grid& grid, std::size_t n_iter,
                           std::span<const features::FeaturePanel> train_panels,
                           std::span<const features::FeaturePanel> valid_panels,
                           const TrainConfig& config, std::uint64_t seed,
                           std::size_t threads = 1);

/// CSV `trial_id,hp_json,val_sharpe,best_epoch,status,seed`.
void write_trial_ledger(const std::filesystem::path& path, std::span<const TrialRecord> trials);

}  // namespace momtx::training
