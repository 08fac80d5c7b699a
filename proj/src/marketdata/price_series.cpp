// SPDX-License-Identifier: Apache-2.0
#include "momtx/marketdata/price_series.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "momtx/errors.hpp"

namespace momtx::marketdata {

std::string_view to_string(AssetClass c) {
  switch (c) {
    case AssetClass::kCM: return "CM";
    case AssetClass::kEQ: return "EQ";
    case AssetClass::kFI: return "FI";
    case AssetClass::kFX: return "FX";
  }
  return "?";
}

AssetClass parse_asset_class(std::string_view text) {
  if (text == "CM") return AssetClass::kCM;
  if (text == "EQ") return AssetClass::kEQ;
  if (text == "FI") return AssetClass::kFI;
  if (text == "FX") return AssetClass::kFX;
  throw DataError(fmt::format("unknown asset class '{}' (expected CM, EQ, FI or FX)", text));
}

void PriceSeries::validate() const {
  if (dates.size() != prices.size()) {
    throw DataError(fmt::format("{}: {} dates but {} prices", asset_id, dates.size(),
                                prices.size()));
  }
  for (std::size_t i = 0; i < prices.size(); ++i) {
    if (!(prices[i] > 0.0) || !std::isfinite(prices[i])) {
      throw DataError(fmt::format("{}: non-positive price {} on {}", asset_id, prices[i],
                                  format_date(dates[i])));
    }
    if (i > 0 && dates[i] <= dates[i - 1]) {
      throw DataError(fmt::format("{}: dates not strictly increasing at {}", asset_id,
                                  format_date(dates[i])));
    }
  }
}

std::map<std::string, AssetClass> load_metadata(const std::filesystem::path& path) {
  CsvReader reader(path, {"symbol", "asset_class"});
  std::map<std::string, AssetClass> out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f[0].empty()) throw ParseError("empty symbol", reader.line());
    if (!out.emplace(f[0], parse_asset_class(f[1])).second) {
      throw DataError(fmt::format("{}: duplicate metadata for {}", path.string(), f[0]));
    }
  }
  return out;
}

std::vector<PriceSeries> load_csv(const std::filesystem::path& prices_path,
                                  const std::filesystem::path& metadata_path) {
  const auto metadata = load_metadata(metadata_path);
  CsvReader reader(prices_path, {"date", "symbol", "price"});
  std::map<std::string, std::vector<std::pair<Date, double>>> rows;
  std::vector<std::string> f;
  while (reader.next(f)) {
    const Date d = parse_date(f[0], reader.line());
    if (f[1].empty()) throw ParseError("empty symbol", reader.line());
    const double p = parse_double(f[2], reader.line());
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw DataError(fmt::format("{} line {}: non-positive price {} for {}", prices_path.string(),
                                  reader.line(), f[2], f[1]));
    }
    rows[f[1]].emplace_back(d, p);
  }
  std::vector<PriceSeries> out;
  for (auto& [symbol, obs] : rows) {
    auto it = metadata.find(symbol);
    if (it == metadata.end()) {
      throw DataError(fmt::format("symbol {} missing from metadata", symbol));
    }
    std::stable_sort(obs.begin(), obs.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    PriceSeries s;
    s.asset_id = symbol;
    s.asset_class = it->second;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (i > 0 && obs[i].first == obs[i - 1].first) {
        throw DataError(fmt::format("duplicate date {} for {}", format_date(obs[i].first), symbol));
      }
      s.dates.push_back(obs[i].first);
      s.prices.push_back(obs[i].second);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_prices_csv(const std::filesystem::path& path, std::span<const PriceSeries> series) {
  std::string text = "date,symbol,price\n";
  for (const PriceSeries& s : series) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      text += fmt::format("{},{},{}\n", format_date(s.dates[i]), s.asset_id, s.prices[i]);
    }
  }
  write_file_atomic(path, text);
}

void write_metadata_csv(const std::filesystem::path& path, std::span<const PriceSeries> series) {
  std::string text = "symbol,asset_class\n";
  for (const PriceSeries& s : series) {
    text += fmt::format("{},{}\n", s.asset_id, to_string(s.asset_class));
  }
  write_file_atomic(path, text);
}

PriceSeries winsorise(const PriceSeries& series, double n_sigma, double half_life) {
  if (series.size() < 2) {
    throw ContractError(fmt::format("winsorise: {} needs at least 2 observations",
                                    series.asset_id));
  }
  if (!(n_sigma > 0.0) || !(half_life > 0.0)) {
    throw ConfigError("winsorise: n_sigma and half_life must be positive");
  }
  const double decay = std::exp2(-1.0 / half_life);
  const double k2 = n_sigma * n_sigma;
  PriceSeries out = series;
  double weight = 0.0;
  double mean = 0.0;
  double var = 0.0;
  for (double& y : out.prices) {
    weight = decay * weight + 1.0;
    const double w = 1.0 / weight;
    const double room = 1.0 - (k2 + 1.0) * w;
    if (room > 0.0 && var > 0.0) {
      const double half_band = n_sigma * std::sqrt(var / room);
      y = std::clamp(y, mean - half_band, mean + half_band);
    }
    const double d = y - mean;
    mean += w * d;
    var = (1.0 - w) * (var + w * d * d);
  }
  return out;
}

}  // namespace momtx::marketdata
