// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "momtx/marketdata/price_series.hpp"

namespace momtx::marketdata {

/// Half-open calendar interval [begin, end).
struct DateRange {
  Date begin;
  Date end;

  bool contains(Date d) const noexcept { return d >= begin && d < end; }
  bool empty() const noexcept { return end <= begin; }
};

struct WindowSplit {
  DateRange train;
  DateRange valid;
  DateRange test;
};

Date year_start(int year);

/// Expanding-window splits. Test blocks of step_years start at
/// first_test_year and tile the rest of the range; the last block is cut
/// at full.end. Train+valid always starts at full.begin, and valid is its
/// trailing 10% of calendar days.
std::vector<WindowSplit> expanding_windows(DateRange full, int step_years,
                                           int first_test_year);

/// Number of observations of `series` inside `range`.
std::size_t count_in(const PriceSeries& series, DateRange range);

/// An asset takes part in a split when its validation range holds at
/// least one full input sequence of `seq_len` observations.
bool passes_inclusion(const PriceSeries& series, const WindowSplit& split,
                      std::size_t seq_len);

std::string describe(const WindowSplit& split);

}  // namespace momtx::marketdata
