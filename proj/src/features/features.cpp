// SPDX-License-Identifier: Apache-2.0
#include "momtx/features/features.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "momtx/errors.hpp"

namespace momtx::features {

std::vector<double> daily_returns(std::span<const double> prices) {
  std::vector<double> out(prices.size(), kUndefined);
  for (std::size_t t = 1; t < prices.size(); ++t) out[t] = prices[t] / prices[t - 1] - 1.0;
  return out;
}

std::vector<double> ewm_std(std::span<const double> values, double span, std::size_t warmup) {
  if (!(span >= 1.0)) throw ConfigError("ewm_std: span must be at least 1");
  const double alpha = 2.0 / (span + 1.0);
  const double decay = 1.0 - alpha;
  std::vector<double> out(values.size(), kUndefined);
  double s1 = 0.0;
  double s2 = 0.0;
  double mean = 0.0;
  double var = 0.0;
  std::size_t seen = 0;
  for (std::size_t t = 0; t < values.size(); ++t) {
    const double x = values[t];
    if (!is_defined(x)) continue;
    s1 = decay * s1 + 1.0;
    s2 = decay * decay * s2 + 1.0;
    const double w = 1.0 / s1;
    const double d = x - mean;
    mean += w * d;
    var = (1.0 - w) * (var + w * d * d);
    ++seen;
    const double denom = s1 * s1 - s2;
    if (seen >= warmup && denom > 0.0) {
      out[t] = std::sqrt(std::max(0.0, var * s1 * s1 / denom));
    }
  }
  return out;
}

std::vector<double> VolSeries::sigma_annualised() const {
  std::vector<double> out(sigma_daily);
  for (double& s : out) s *= std::sqrt(kTradingDays);
  return out;
}

VolSeries ewm_volatility(const marketdata::PriceSeries& series, double span, std::size_t warmup) {
  VolSeries v;
  v.dates = series.dates;
  v.sigma_daily = ewm_std(daily_returns(series.prices), span, warmup);
  return v;
}

std::vector<double> normalized_return(std::span<const double> prices, std::size_t horizon,
                                      std::span<const double> sigma_daily) {
  if (horizon == 0) throw ConfigError("normalized_return: horizon must be positive");
  if (prices.size() != sigma_daily.size()) {
    throw AlignmentError(fmt::format("normalized_return: {} prices vs {} vol values",
                                     prices.size(), sigma_daily.size()));
  }
  std::vector<double> out(prices.size(), kUndefined);
  const double root_h = std::sqrt(static_cast<double>(horizon));
  for (std::size_t t = horizon; t < prices.size(); ++t) {
    const double sigma = sigma_daily[t];
    if (!is_defined(sigma)) continue;
    const double r = prices[t] / prices[t - horizon] - 1.0;
    if (sigma > 0.0) {
      out[t] = r / (sigma * root_h);
    } else if (r == 0.0) {
      out[t] = 0.0;
    }
  }
  return out;
}

std::string MacdSpec::column_name() const {
  return fmt::format("macd_{}_{}", short_window, long_window);
}

std::vector<MacdSpec> default_macd_specs() { return {{8, 24}, {16, 48}, {32, 96}}; }

std::vector<double> ewm_mean(std::span<const double> values, std::size_t k) {
  if (k == 0) throw ConfigError("ewm_mean: window must be positive");
  const double alpha = 1.0 / static_cast<double>(k);
  std::vector<double> out(values.size());
  if (values.empty()) return out;
  double m = values[0];
  for (std::size_t t = 0; t < values.size(); ++t) {
    m += alpha * (values[t] - m);
    out[t] = m;
  }
  return out;
}

std::vector<double> rolling_std(std::span<const double> values, std::size_t window) {
  if (window < 2) throw ConfigError("rolling_std: window must be at least 2");
  std::vector<double> out(values.size(), kUndefined);
  for (std::size_t t = window - 1; t < values.size(); ++t) {
    const auto w = values.subspan(t + 1 - window, window);
    if (std::any_of(w.begin(), w.end(), [](double v) { return !is_defined(v); })) continue;
    const double shift = w[0];
    double sum = 0.0;
    for (double v : w) sum += v - shift;
    const double mean = sum / static_cast<double>(window);
    double ss = 0.0;
    for (double v : w) ss += (v - shift - mean) * (v - shift - mean);
    out[t] = std::sqrt(ss / static_cast<double>(window - 1));
  }
  return out;
}

namespace {

double guarded_ratio(double num, double den) {
  if (!is_defined(num) || !is_defined(den)) return kUndefined;
  if (den > 0.0) return num / den;
  return num == 0.0 ? 0.0 : kUndefined;
}

}  // namespace

std::vector<double> macd(std::span<const double> prices, MacdSpec spec, std::size_t price_window,
                         std::size_t signal_window) {
  if (spec.short_window == 0 || spec.short_window >= spec.long_window) {
    throw ConfigError(fmt::format("macd: need 0 < S < L, got ({}, {})", spec.short_window,
                                  spec.long_window));
  }
  const auto fast = ewm_mean(prices, spec.short_window);
  const auto slow = ewm_mean(prices, spec.long_window);
  const auto price_sd = rolling_std(prices, price_window);
  std::vector<double> q(prices.size());
  for (std::size_t t = 0; t < prices.size(); ++t) q[t] = guarded_ratio(fast[t] - slow[t], price_sd[t]);
  const auto q_sd = rolling_std(q, signal_window);
  std::vector<double> out(prices.size());
  for (std::size_t t = 0; t < prices.size(); ++t) out[t] = guarded_ratio(q[t], q_sd[t]);
  return out;
}

std::size_t FeaturePanel::column_index(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ContractError(fmt::format("panel {} has no column {}", asset_id, name));
  return static_cast<std::size_t>(it - columns.begin());
}

void FeaturePanel::validate() const {
  const std::size_t n = dates.size();
  if (values.size() != n * columns.size() || fwd_ret.size() != n || sigma_daily.size() != n) {
    throw DataError(fmt::format("panel {}: inconsistent sizes", asset_id));
  }
  for (std::size_t r = 0; r < n; ++r) {
    if (r > 0 && dates[r] <= dates[r - 1]) {
      throw DataError(fmt::format("panel {}: dates not increasing", asset_id));
    }
    if (!(sigma_daily[r] > 0.0)) throw DataError(fmt::format("panel {}: non-positive sigma", asset_id));
    for (double v : row(r)) {
      if (!std::isfinite(v)) throw DataError(fmt::format("panel {}: undefined feature", asset_id));
    }
  }
}

FeaturePanel build_feature_panel(const marketdata::PriceSeries& series,
                                 std::span<const MacdSpec> specs,
                                 std::span<const cpd::CpdFeatures> cpd) {
  if (series.size() == 0) {
    throw AlignmentError(fmt::format("build_feature_panel: {} has no prices", series.asset_id));
  }
  const std::vector<MacdSpec> macd_specs =
      specs.empty() ? default_macd_specs() : std::vector<MacdSpec>(specs.begin(), specs.end());
  const std::span<const double> prices(series.prices);
  const std::size_t n = prices.size();
  const auto sigma = ewm_volatility(series).sigma_daily;

  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  for (std::size_t h : kReturnHorizons) {
    names.push_back(fmt::format("ret_{}", h));
    cols.push_back(normalized_return(prices, h, sigma));
  }
  for (const MacdSpec& s : macd_specs) {
    names.push_back(s.column_name());
    cols.push_back(macd(prices, s));
  }

  std::vector<const cpd::CpdFeatures*> sets;
  for (const auto& c : cpd) sets.push_back(&c);
  std::sort(sets.begin(), sets.end(), [](auto* a, auto* b) { return a->lbw < b->lbw; });
  std::map<Date, std::size_t> index;
  for (std::size_t t = 0; t < n; ++t) index.emplace(series.dates[t], t);
  for (const cpd::CpdFeatures* c : sets) {
    if (c->asset_id != series.asset_id) {
      throw AlignmentError(fmt::format("CPD features for {} supplied with prices of {}",
                                       c->asset_id, series.asset_id));
    }
    if (c->gamma.size() != c->dates.size() || c->nu.size() != c->dates.size()) {
      throw AlignmentError(fmt::format("CPD features for {} (lbw {}) have ragged columns",
                                       c->asset_id, c->lbw));
    }
    std::vector<double> nu(n, kUndefined);
    std::vector<double> gamma(n, kUndefined);
    for (std::size_t i = 0; i < c->dates.size(); ++i) {
      auto it = index.find(c->dates[i]);
      if (it == index.end()) {
        throw AlignmentError(fmt::format("CPD date {} for {} not in the price series",
                                         marketdata::format_date(c->dates[i]), c->asset_id));
      }
      nu[it->second] = c->nu[i];
      gamma[it->second] = c->gamma[i];
    }
    names.push_back(fmt::format("cpd_nu_{}", c->lbw));
    cols.push_back(std::move(nu));
    names.push_back(fmt::format("cpd_gamma_{}", c->lbw));
    cols.push_back(std::move(gamma));
  }

  FeaturePanel panel;
  panel.asset_id = series.asset_id;
  panel.asset_class = series.asset_class;
  panel.columns = names;
  for (std::size_t t = 0; t < n; ++t) {
    if (!(sigma[t] > 0.0)) continue;
    if (std::any_of(cols.begin(), cols.end(), [t](const auto& c) { return !is_defined(c[t]); })) {
      continue;
    }
    panel.dates.push_back(series.dates[t]);
    for (const auto& c : cols) panel.values.push_back(c[t]);
    panel.fwd_ret.push_back(t + 1 < n ? prices[t + 1] / prices[t] - 1.0 : kUndefined);
    panel.sigma_daily.push_back(sigma[t]);
  }
  return panel;
}

void write_panel_csv(const std::filesystem::path& path, const FeaturePanel& panel) {
  std::string text = "symbol,date";
  for (const auto& c : panel.columns) text += "," + c;
  text += ",asset_class,fwd_ret,sigma_daily\n";
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    text += panel.asset_id;
    text += ',';
    text += marketdata::format_date(panel.dates[r]);
    for (double v : panel.row(r)) text += fmt::format(",{}", v);
    text += fmt::format(",{},{},{}\n", marketdata::to_string(panel.asset_class), panel.fwd_ret[r],
                        panel.sigma_daily[r]);
  }
  marketdata::write_file_atomic(path, text);
}

FeaturePanel read_panel_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open panel {}", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw ParseError(fmt::format("{}: empty panel file", path.string()), 1);
  auto header = marketdata::split_csv_line(line);
  if (header.size() < 5 || header[0] != "symbol" || header[1] != "date" ||
      header[header.size() - 3] != "asset_class" || header[header.size() - 2] != "fwd_ret" ||
      header.back() != "sigma_daily") {
    throw ParseError(fmt::format("{}: not a feature panel header", path.string()), 1);
  }
  FeaturePanel panel;
  panel.columns.assign(header.begin() + 2, header.end() - 3);
  const std::size_t m = panel.columns.size();
  marketdata::CsvReader reader(path, header);
  std::vector<std::string> f;
  bool first = true;
  while (reader.next(f)) {
    if (first) {
      panel.asset_id = f[0];
      panel.asset_class = marketdata::parse_asset_class(f[m + 2]);
      first = false;
    } else if (f[0] != panel.asset_id) {
      throw DataError(fmt::format("{}: mixed symbols {} and {}", path.string(), panel.asset_id, f[0]));
    }
    panel.dates.push_back(marketdata::parse_date(f[1], reader.line()));
    for (std::size_t j = 0; j < m; ++j) panel.values.push_back(marketdata::parse_double(f[2 + j], reader.line()));
    panel.fwd_ret.push_back(marketdata::parse_double(f[m + 3], reader.line()));
    panel.sigma_daily.push_back(marketdata::parse_double(f[m + 4], reader.line()));
  }
  if (first) throw DataError(fmt::format("{}: panel has no rows", path.string()));
  panel.validate();
  return panel;
}

}  // namespace momtx::features
