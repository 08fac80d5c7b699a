// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "momtx/cpd/types.hpp"
#include "momtx/marketdata/price_series.hpp"

namespace momtx::features {

using marketdata::Date;

/// Marker for values that are not defined yet (warm-up) or at all.
inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();
inline bool is_defined(double v) { return !std::isnan(v); }

inline constexpr double kTradingDays = 252.0;

/// Simple returns p_t / p_{t-1} - 1; entry 0 is undefined.
std::vector<double> daily_returns(std::span<const double> prices);

/// Exponentially weighted standard deviation with decay alpha = 2/(span+1),
/// normalised weights and the unbiased-weights correction. Undefined
/// entries of the input are skipped. Output is undefined until `warmup`
/// observations have been seen.
std::vector<double> ewm_std(std::span<const double> values, double span = 60.0,
                            std::size_t warmup = 10);

struct VolSeries {
  std::vector<Date> dates;
  std::vector<double> sigma_daily;

  std::vector<double> sigma_annualised() const;
};

VolSeries ewm_volatility(const marketdata::PriceSeries& series, double span = 60.0,
                         std::size_t warmup = 10);

/// (p_t / p_{t-h} - 1) / (sigma_t * sqrt(h)). A zero sigma gives 0 when the
/// return is exactly 0 and undefined otherwise.
std::vector<double> normalized_return(std::span<const double> prices, std::size_t horizon,
                                      std::span<const double> sigma_daily);

struct MacdSpec {
  std::size_t short_window = 8;
  std::size_t long_window = 24;

  std::string column_name() const;
};

std::vector<MacdSpec> default_macd_specs();

/// Exponential average with decay 1 - 1/k per step (half-life
/// log(0.5)/log(1 - 1/k)), seeded with the first value.
std::vector<double> ewm_mean(std::span<const double> values, std::size_t k);

/// Trailing sample standard deviation over `window` observations.
std::vector<double> rolling_std(std::span<const double> values, std::size_t window);

/// Volatility-normalised MACD: q = (m_S - m_L) / std_63(p), M = q / std_252(q).
std::vector<double> macd(std::span<const double> prices, MacdSpec spec,
                         std::size_t price_window = 63, std::size_t signal_window = 252);

inline constexpr std::size_t kReturnHorizons[] = {1, 21, 63, 126, 252};

/// Per-asset model inputs. `values` is row-major [rows x columns]. Only
/// rows where every feature is defined and sigma_daily > 0 are present.
/// fwd_ret is the next day's simple return (undefined on the final row).
struct FeaturePanel {
  std::string asset_id;
  marketdata::AssetClass asset_class = marketdata::AssetClass::kEQ;
  std::vector<std::string> columns;
  std::vector<Date> dates;
  std::vector<double> values;
  std::vector<double> fwd_ret;
  std::vector<double> sigma_daily;

  std::size_t rows() const noexcept { return dates.size(); }
  std::size_t n_features() const noexcept { return columns.size(); }
  double at(std::size_t row, std::size_t col) const { return values[row * columns.size() + col]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values).subspan(r * columns.size(), columns.size());
  }
  /// Column position or throws ContractError.
  std::size_t column_index(const std::string& name) const;
  /// Throws DataError if any invariant is broken.
  void validate() const;
};

/// Builds the panel from cleaned prices; empty `specs` means the default
/// MACD triple. CPD sets must belong to the same
/// asset; they are laid out in ascending lookback order as nu, gamma pairs.
FeaturePanel build_feature_panel(const marketdata::PriceSeries& series,
                                 std::span<const MacdSpec> specs = {},
                                 std::span<const cpd::CpdFeatures> cpd = {});

void write_panel_csv(const std::filesystem::path& path, const FeaturePanel& panel);
FeaturePanel read_panel_csv(const std::filesystem::path& path);

}  // namespace momtx::features
