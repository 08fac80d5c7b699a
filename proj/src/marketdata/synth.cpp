// SPDX-License-Identifier: Apache-2.0
#include "momtx/marketdata/synth.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "momtx/errors.hpp"

namespace momtx::marketdata {

void SynthSpec::validate() const {
  if (n_assets == 0 || n_days == 0) throw ConfigError("synth: n_assets and n_days must be positive");
  if (!(regime_mean_duration > 0.0)) throw ConfigError("synth: regime_mean_duration must be positive");
  if (!(annual_drift >= 0.0) || !(daily_vol >= 0.0)) {
    throw ConfigError("synth: drift magnitude and volatility must be non-negative");
  }
  if (vol_multipliers.empty()) throw ConfigError("synth: vol_multipliers is empty");
  for (double m : vol_multipliers) {
    if (!(m > 0.0)) throw ConfigError("synth: vol multipliers must be positive");
  }
  if (!(initial_price > 0.0)) throw ConfigError("synth: initial_price must be positive");
}

std::vector<Date> business_days(Date start, std::size_t n) {
  std::vector<Date> out;
  out.reserve(n);
  Date d = start;
  while (out.size() < n) {
    const std::chrono::weekday wd{d};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.push_back(d);
    d += std::chrono::days{1};
  }
  return out;
}

SynthData synth_generate(const SynthSpec& spec) {
  spec.validate();
  const std::vector<Date> dates = business_days(spec.start, spec.n_days);
  const double mu = spec.annual_drift / 252.0;
  SynthData data;
  for (std::size_t a = 0; a < spec.n_assets; ++a) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed),
                      static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(a)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::exponential_distribution<double> duration(1.0 / spec.regime_mean_duration);
    std::uniform_int_distribution<std::size_t> pick(0, spec.vol_multipliers.size() - 1);

    PriceSeries s;
    s.asset_id = fmt::format("SYN{:02d}", a);
    s.asset_class = static_cast<AssetClass>(a % kNumAssetClasses);
    s.dates = dates;
    s.prices.reserve(spec.n_days);

    int sign = std::bernoulli_distribution(0.5)(rng) ? 1 : -1;
    double mult = spec.vol_multipliers[pick(rng)];
    auto next_length = [&]() {
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(duration(rng))));
    };
    std::size_t remaining = next_length();
    data.regimes.push_back(Regime{s.asset_id, dates[0], sign, mult});

    double log_price = std::log(spec.initial_price);
    s.prices.push_back(spec.initial_price);
    for (std::size_t t = 1; t < spec.n_days; ++t) {
      if (--remaining == 0) {
        sign = -sign;
        mult = spec.vol_multipliers[pick(rng)];
        remaining = next_length();
        data.regimes.push_back(Regime{s.asset_id, dates[t], sign, mult});
      }
      const double sigma = spec.daily_vol * mult;
      log_price += sign * mu - 0.5 * sigma * sigma + sigma * noise(rng);
      s.prices.push_back(std::exp(log_price));
    }
    data.series.push_back(std::move(s));
  }
  return data;
}

void write_regimes_csv(const std::filesystem::path& path, std::span<const Regime> regimes) {
  std::string text = "symbol,regime_start_date,drift_sign,vol_multiplier\n";
  for (const Regime& r : regimes) {
    text += fmt::format("{},{},{},{}\n", r.symbol, format_date(r.start), r.drift_sign,
                        r.vol_multiplier);
  }
  write_file_atomic(path, text);
}

}  // namespace momtx::marketdata
