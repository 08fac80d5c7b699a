// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "momtx/features/features.hpp"
#include "momtx/marketdata/splits.hpp"
#include "momtx/model/model.hpp"

namespace momtx::interpret {

using marketdata::Date;
using model::Model;

struct VariableImportanceRecord {
  std::string asset_id;
  std::vector<std::string> features;
  std::vector<Date> dates;
  std::vector<double> weights;   ///< [dates x features], row-major
  std::vector<double> averages;  ///< unweighted mean over the dates

  std::size_t n_features() const noexcept { return features.size(); }
  double weight(std::size_t row, std::size_t feature) const {
    return weights[row * features.size() + feature];
  }
};

/// VSN weights for every panel row inside `range`, one record per panel.
/// Throws UnsupportedModel for an LSTM-DMN.
std::vector<VariableImportanceRecord> extract_variable_importance(
    const Model& model, std::span<const features::FeaturePanel> panels,
    marketdata::DateRange range);

/// Mean weights over all dates of all records.
std::vector<double> pooled_average(std::span<const VariableImportanceRecord> records);

struct AttentionMap {
  std::string asset_id;
  Date pred_date;
  std::vector<Date> window_dates;            ///< tau dates ending at pred_date
  std::vector<double> weights;               ///< head mean of the last row, length tau
  std::vector<std::vector<double>> per_head; ///< last row of each head
  std::vector<double> matrix;                ///< head mean, tau x tau, when requested

  std::size_t seq_len() const noexcept { return weights.size(); }
};

/// Attention of the window of seq_len rows ending at `date`. Throws
/// ContractError when the date is missing or the window is incomplete, and
/// UnsupportedModel for an LSTM-DMN.
AttentionMap extract_attention(const Model& model, const features::FeaturePanel& panel, Date date,
                               bool full_matrix = false);

/// CSV `symbol,date,feature,weight`.
void write_importance_csv(const std::filesystem::path& path,
                          std::span<const VariableImportanceRecord> records);

/// One row per asset plus a final `ALL` row; one column per feature.
void write_importance_summary_csv(const std::filesystem::path& path,
                                  std::span<const VariableImportanceRecord> records);

/// CSV `symbol,pred_date,lag_days,weight`; lag 0 is the prediction date.
void write_attention_csv(const std::filesystem::path& path, std::span<const AttentionMap> maps);

/// CSV `symbol,pred_date,head,lag_days,weight`.
void write_attention_heads_csv(const std::filesystem::path& path,
                               std::span<const AttentionMap> maps);

}  // namespace momtx::interpret
