// SPDX-License-Identifier: Apache-2.0
#include "momtx/marketdata/splits.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "momtx/errors.hpp"

namespace momtx::marketdata {

Date year_start(int year) { return Date{std::chrono::year{year} / 1 / 1}; }

namespace {

Date add_years(Date d, int years) {
  std::chrono::year_month_day ymd{d};
  ymd += std::chrono::years{years};
  if (!ymd.ok()) ymd = ymd.year() / ymd.month() / std::chrono::last;
  return Date{ymd};
}

}  // namespace

std::vector<WindowSplit> expanding_windows(DateRange full, int step_years, int first_test_year) {
  if (step_years <= 0) throw ConfigError("expanding_windows: step_years must be positive");
  if (full.empty()) throw ConfigError("expanding_windows: empty date range");
  if (add_years(full.begin, 2 * step_years) > full.end) {
    throw ConfigError(fmt::format("expanding_windows: range {} to {} is shorter than {} years",
                                  format_date(full.begin), format_date(full.end),
                                  2 * step_years));
  }
  const Date first = year_start(first_test_year);
  if (first <= full.begin || first >= full.end) {
    throw ConfigError(fmt::format("expanding_windows: first test year {} outside {} to {}",
                                  first_test_year, format_date(full.begin),
                                  format_date(full.end)));
  }
  std::vector<WindowSplit> out;
  for (int y = first_test_year;; y += step_years) {
    const Date test_begin = year_start(y);
    if (test_begin >= full.end) break;
    const Date test_end = std::min(year_start(y + step_years), full.end);
    const auto span = (test_begin - full.begin).count();
    const auto valid_days = static_cast<int>(std::lround(0.1 * static_cast<double>(span)));
    const Date valid_begin = test_begin - std::chrono::days{valid_days};
    out.push_back(WindowSplit{DateRange{full.begin, valid_begin},
                              DateRange{valid_begin, test_begin},
                              DateRange{test_begin, test_end}});
  }
  return out;
}

std::size_t count_in(const PriceSeries& series, DateRange range) {
  const auto lo = std::lower_bound(series.dates.begin(), series.dates.end(), range.begin);
  const auto hi = std::lower_bound(series.dates.begin(), series.dates.end(), range.end);
  return static_cast<std::size_t>(hi - lo);
}

bool passes_inclusion(const PriceSeries& series, const WindowSplit& split, std::size_t seq_len) {
  return count_in(series, split.valid) >= seq_len;
}

std::string describe(const WindowSplit& split) {
  return fmt::format("train [{}, {}) valid [{}, {}) test [{}, {})",
                     format_date(split.train.begin), format_date(split.train.end),
                     format_date(split.valid.begin), format_date(split.valid.end),
                     format_date(split.test.begin), format_date(split.test.end));
}

}  // namespace momtx::marketdata
