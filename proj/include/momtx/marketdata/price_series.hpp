// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "momtx/marketdata/csv.hpp"

namespace momtx::marketdata {

enum class AssetClass { kCM = 0, kEQ = 1, kFI = 2, kFX = 3 };
inline constexpr int kNumAssetClasses = 4;

std::string_view to_string(AssetClass c);
/// Accepts CM, EQ, FI or FX; throws DataError otherwise.
AssetClass parse_asset_class(std::string_view text);

struct PriceSeries {
  std::string asset_id;
  AssetClass asset_class = AssetClass::kEQ;
  std::vector<Date> dates;
  std::vector<double> prices;

  std::size_t size() const noexcept { return prices.size(); }
  /// Throws DataError when dates are not strictly increasing, lengths
  /// differ, or a price is not positive and finite.
  void validate() const;
};

std::map<std::string, AssetClass> load_metadata(const std::filesystem::path& path);

/// One series per symbol, ordered by symbol, dates sorted ascending.
std::vector<PriceSeries> load_csv(const std::filesystem::path& prices_path,
                                  const std::filesystem::path& metadata_path);

void write_prices_csv(const std::filesystem::path& path,
                      std::span<const PriceSeries> series);
void write_metadata_csv(const std::filesystem::path& path,
                        std::span<const PriceSeries> series);

/// Clips each price to mean +/- n_sigma * std of an exponentially weighted
/// window (decay 2^(-1/half_life) per observation).
///
/// The statistics at t are taken over the cleaned history up to and
/// including the cleaned value at t itself, which makes the bound a fixed
/// point: the clipped value sits exactly on the band it induces, and
/// applying winsorise again changes nothing. When the prior variance is
/// zero the value passes through.
PriceSeries winsorise(const PriceSeries& series, double n_sigma = 5.0,
                      double half_life = 252.0);

}  // namespace momtx::marketdata
