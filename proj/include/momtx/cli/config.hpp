// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "momtx/marketdata/splits.hpp"
#include "momtx/marketdata/synth.hpp"
#include "momtx/model/model.hpp"
#include "momtx/training/training.hpp"

namespace momtx::cli {

using marketdata::Date;
using marketdata::DateRange;

/// Model variants selectable from the command line; `tft_cpd` is the TFT
/// fed with changepoint features.
enum class ModelVariant { kLstm, kTft, kTftCpd };

std::string_view to_string(ModelVariant v);
/// Throws ConfigError listing the allowed names.
ModelVariant parse_model_variant(std::string_view text);
model::ModelKind kind_of(ModelVariant v);
bool uses_cpd(ModelVariant v);
/// Strategy label used in reports.
std::string strategy_label(ModelVariant v);

struct Scenario {
  std::string name;
  DateRange range;
};

struct SplitSettings {
  Date begin{};
  Date end{};
  int first_test_year = 0;
  int step_years = 5;
};

struct TrainSettings {
  std::optional<std::size_t> seq_len;
  std::optional<std::size_t> stride;
  std::size_t max_epochs = 300;
  std::size_t patience = 25;
  std::size_t n_iter = 50;
  std::size_t threads = 1;
};

/// Partial grid; empty lists keep the per-model default.
struct GridOverrides {
  std::vector<std::size_t> batch_size;
  std::vector<double> learning_rate;
  std::vector<double> dropout;
  std::vector<double> max_grad_norm;
  std::vector<std::size_t> hidden;
  std::vector<std::size_t> heads;

  training::Grid apply(training::Grid grid) const;
};

struct RunConfig {
  std::filesystem::path out = ".";
  std::optional<std::filesystem::path> prices;
  std::optional<std::filesystem::path> metadata;
  std::optional<std::filesystem::path> features_dir;
  std::optional<std::filesystem::path> cpd_cache;
  std::optional<std::filesystem::path> models_dir;
  std::uint64_t seed = 0;
  ModelVariant model = ModelVariant::kTft;
  bool winsorise = true;
  std::vector<std::size_t> cpd_lbws{21, 126};
  std::size_t cpd_threads = 1;
  std::optional<SplitSettings> splits;
  std::vector<Scenario> scenarios;
  TrainSettings train;
  GridOverrides grid;
  marketdata::SynthSpec synth;
  std::optional<Date> interpret_date;
  std::optional<std::size_t> interpret_split;

  std::filesystem::path prices_path() const { return prices.value_or(out / "prices.csv"); }
  std::filesystem::path metadata_path() const { return metadata.value_or(out / "metadata.csv"); }
  std::filesystem::path features_path() const { return features_dir.value_or(out / "features"); }
  std::filesystem::path cpd_path() const { return cpd_cache.value_or(out / "cpd_cache.csv"); }
  std::filesystem::path models_path() const { return models_dir.value_or(out / "models"); }

  std::size_t seq_len() const;
  std::size_t stride() const;
  training::TrainConfig train_config() const;
  training::Grid search_grid() const;
  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// Reads a JSON config. Relative paths resolve against the file's
/// directory; unknown keys are rejected with ConfigError.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

}  // namespace momtx::cli
