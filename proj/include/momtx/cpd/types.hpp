// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "momtx/marketdata/csv.hpp"

namespace momtx::cpd {

using marketdata::Date;

/// Changepoint features for one asset and one lookback window length.
/// gamma is the normalised changepoint location (1 = at the window end),
/// nu the severity; both lie in (0, 1). Dates whose fit failed are absent.
struct CpdFeatures {
  std::string asset_id;
  std::size_t lbw = 0;
  std::vector<Date> dates;
  std::vector<double> gamma;
  std::vector<double> nu;
};

}  // namespace momtx::cpd
