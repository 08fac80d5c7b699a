// SPDX-License-Identifier: Apache-2.0
#include "momtx/interpret/interpret.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "momtx/errors.hpp"
#include "momtx/marketdata/csv.hpp"
#include "momtx/training/training.hpp"

namespace momtx::interpret {

using features::FeaturePanel;
using marketdata::format_date;

namespace {

void require_tft(const Model& model, std::string_view what) {
  if (model.kind() != model::ModelKind::kTft) {
    throw UnsupportedModel(fmt::format("{} requires a TFT model", what));
  }
}

}  // namespace

std::vector<VariableImportanceRecord> extract_variable_importance(
    const Model& model, std::span<const FeaturePanel> panels, marketdata::DateRange range) {
  require_tft(model, "variable importance");
  const Model frozen = training::detached(model);
  const std::size_t tau = frozen.dims().seq_len;
  std::vector<VariableImportanceRecord> out;
  for (const FeaturePanel& panel : panels) {
    const std::size_t m = panel.n_features();
    if (m != frozen.dims().n_inputs) {
      throw DimensionError(fmt::format("panel {} has {} features, model expects {}",
                                       panel.asset_id, m, frozen.dims().n_inputs));
    }
    VariableImportanceRecord rec;
    rec.asset_id = panel.asset_id;
    rec.features = panel.columns;
    rec.averages.assign(m, 0.0);
    const std::size_t n = panel.rows();
    if (n >= tau) {
      std::vector<training::WindowRef> windows;
      for (std::size_t s = 0; s < n; s += tau) windows.push_back({0, std::min(s, n - tau)});
      std::span<const FeaturePanel> one(&panel, 1);
      training::Batch batch = training::gather_batch(one, windows, tau);
      tensorgrad::Tape tape;
      auto result = frozen.forward(tape, batch.inputs, batch.static_ids);
      const auto w = result.vsn_weights.data();
      for (std::size_t i = 0; i < windows.size(); ++i) {
        for (std::size_t row = i * tau; row < std::min((i + 1) * tau, n); ++row) {
          if (!range.contains(panel.dates[row])) continue;
          rec.dates.push_back(panel.dates[row]);
          const std::size_t off = (i * tau + row - windows[i].start) * m;
          rec.weights.insert(rec.weights.end(), w.begin() + static_cast<std::ptrdiff_t>(off),
                             w.begin() + static_cast<std::ptrdiff_t>(off + m));
        }
      }
    }
    for (std::size_t r = 0; r < rec.dates.size(); ++r) {
      for (std::size_t j = 0; j < m; ++j) rec.averages[j] += rec.weight(r, j);
    }
    if (!rec.dates.empty()) {
      for (double& a : rec.averages) a /= static_cast<double>(rec.dates.size());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<double> pooled_average(std::span<const VariableImportanceRecord> records) {
  if (records.empty()) return {};
  const std::size_t m = records.front().n_features();
  std::vector<double> sum(m, 0.0);
  std::size_t count = 0;
  for (const auto& rec : records) {
    if (rec.n_features() != m) throw DimensionError("records have different feature counts");
    for (std::size_t r = 0; r < rec.dates.size(); ++r) {
      for (std::size_t j = 0; j < m; ++j) sum[j] += rec.weight(r, j);
    }
    count += rec.dates.size();
  }
  if (count > 0) {
    for (double& s : sum) s /= static_cast<double>(count);
  }
  return sum;
}

AttentionMap extract_attention(const Model& model, const FeaturePanel& panel, Date date,
                               bool full_matrix) {
  require_tft(model, "attention extraction");
  const std::size_t tau = model.dims().seq_len;
  auto it = std::lower_bound(panel.dates.begin(), panel.dates.end(), date);
  if (it == panel.dates.end() || *it != date) {
    throw ContractError(
        fmt::format("{} has no row dated {}", panel.asset_id, format_date(date)));
  }
  const std::size_t end = static_cast<std::size_t>(it - panel.dates.begin()) + 1;
  if (end < tau) {
    throw ContractError(fmt::format("{}: window ending {} needs {} rows, only {} available",
                                    panel.asset_id, format_date(date), tau, end));
  }
  const Model frozen = training::detached(model);
  std::vector<training::WindowRef> window{{0, end - tau}};
  std::span<const FeaturePanel> one(&panel, 1);
  training::Batch batch = training::gather_batch(one, window, tau);
  tensorgrad::Tape tape;
  auto result = frozen.forward(tape, batch.inputs, batch.static_ids);

  AttentionMap map;
  map.asset_id = panel.asset_id;
  map.pred_date = date;
  map.window_dates.assign(panel.dates.begin() + static_cast<std::ptrdiff_t>(end - tau),
                          panel.dates.begin() + static_cast<std::ptrdiff_t>(end));
  const std::size_t heads = result.attention.size();
  map.weights.assign(tau, 0.0);
  if (full_matrix) map.matrix.assign(tau * tau, 0.0);
  for (const tensorgrad::Tensor& a : result.attention) {
    const auto w = a.data();
    map.per_head.emplace_back(w.begin() + static_cast<std::ptrdiff_t>((tau - 1) * tau),
                              w.end());
    for (std::size_t k = 0; k < tau; ++k) map.weights[k] += w[(tau - 1) * tau + k];
    if (full_matrix) {
      for (std::size_t k = 0; k < tau * tau; ++k) map.matrix[k] += w[k];
    }
  }
  for (double& v : map.weights) v /= static_cast<double>(heads);
  for (double& v : map.matrix) v /= static_cast<double>(heads);
  return map;
}

void write_importance_csv(const std::filesystem::path& path,
                          std::span<const VariableImportanceRecord> records) {
  std::string text = "symbol,date,feature,weight\n";
  for (const auto& rec : records) {
    for (std::size_t r = 0; r < rec.dates.size(); ++r) {
      const std::string date = format_date(rec.dates[r]);
      for (std::size_t j = 0; j < rec.n_features(); ++j) {
        text += fmt::format("{},{},{},{}\n", rec.asset_id, date, rec.features[j],
                            rec.weight(r, j));
      }
    }
  }
  marketdata::write_file_atomic(path, text);
}

void write_importance_summary_csv(const std::filesystem::path& path,
                                  std::span<const VariableImportanceRecord> records) {
  if (records.empty()) throw ContractError("no importance records to summarise");
  std::string text = "symbol";
  for (const auto& f : records.front().features) text += "," + f;
  text += "\n";
  auto row = [&](const std::string& name, std::span<const double> values) {
    text += name;
    for (double v : values) text += fmt::format(",{}", v);
    text += "\n";
  };
  for (const auto& rec : records) {
    if (rec.features != records.front().features) {
      throw DimensionError("records have different features");
    }
    row(rec.asset_id, rec.averages);
  }
  row("ALL", pooled_average(records));
  marketdata::write_file_atomic(path, text);
}

void write_attention_csv(const std::filesystem::path& path, std::span<const AttentionMap> maps) {
  std::string text = "symbol,pred_date,lag_days,weight\n";
  for (const auto& map : maps) {
    const std::string date = format_date(map.pred_date);
    const std::size_t tau = map.seq_len();
    for (std::size_t k = 0; k < tau; ++k) {
      text += fmt::format("{},{},{},{}\n", map.asset_id, date, tau - 1 - k, map.weights[k]);
    }
  }
  marketdata::write_file_atomic(path, text);
}

void write_attention_heads_csv(const std::filesystem::path& path,
                               std::span<const AttentionMap> maps) {
  std::string text = "symbol,pred_date,head,lag_days,weight\n";
  for (const auto& map : maps) {
    const std::string date = format_date(map.pred_date);
    for (std::size_t h = 0; h < map.per_head.size(); ++h) {
      const std::size_t tau = map.per_head[h].size();
      for (std::size_t k = 0; k < tau; ++k) {
        text += fmt::format("{},{},{},{},{}\n", map.asset_id, date, h, tau - 1 - k,
                            map.per_head[h][k]);
      }
    }
  }
  marketdata::write_file_atomic(path, text);
}

}  // namespace momtx::interpret
