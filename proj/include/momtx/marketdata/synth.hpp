// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "momtx/marketdata/price_series.hpp"

namespace momtx::marketdata {

struct SynthSpec {
  std::size_t n_assets = 10;
  std::size_t n_days = 2016;
  double regime_mean_duration = 63.0;
  /// Annualised drift magnitude; the sign is set per regime.
  double annual_drift = 0.15;
  double daily_vol = 0.15 / 15.874507866387544;
  std::vector<double> vol_multipliers{1.0};
  double initial_price = 100.0;
  Date start = Date{std::chrono::year{2000} / 1 / 3};
  std::uint64_t seed = 0;

  /// Throws ConfigError on non-positive counts, durations or prices,
  /// negative drift/vol, or an empty multiplier list.
  void validate() const;
};

struct Regime {
  std::string symbol;
  Date start;
  int drift_sign = 1;
  double vol_multiplier = 1.0;
};

struct SynthData {
  std::vector<PriceSeries> series;
  std::vector<Regime> regimes;
};

/// Regime-switching geometric random walk on business days (Mon-Fri).
/// Regime lengths are exponential with the configured mean (at least one
/// day); the drift sign flips at every boundary and the volatility
/// multiplier is redrawn from the list. Each asset starts in a random sign.
SynthData synth_generate(const SynthSpec& spec);

/// Weekday calendar starting at `start` (rolled forward off weekends).
std::vector<Date> business_days(Date start, std::size_t n);

void write_regimes_csv(const std::filesystem::path& path, std::span<const Regime> regimes);

}  // namespace momtx::marketdata
