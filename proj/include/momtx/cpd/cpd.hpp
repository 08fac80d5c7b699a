// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "momtx/cpd/types.hpp"
#include "momtx/marketdata/price_series.hpp"

namespace momtx::cpd {

struct GpOptions {
  int max_iterations = 200;
  int restarts = 3;
  double jitter = 1e-8;
};

/// Natural parameters (log variances, log lengthscales, location) of a
/// fitted GP on one standardised window.
///
/// Plain:       [log s2, log ell, log noise]
/// Changepoint: [log s2_a, log ell_a, log s2_b, log ell_b, location,
///               log steepness, log noise]
struct GpFit {
  bool ok = false;
  double nlml = std::numeric_limits<double>::infinity();
  std::vector<double> params;
  double mean = 0.0;
  /// Changepoint position in index units, inside (0, n - 1).
  double location = std::numeric_limits<double>::quiet_NaN();
};

/// Zero mean, unit (population) deviation; a constant window maps to zeros.
std::vector<double> standardise(std::span<const double> values);

/// Negative log marginal likelihood of y at time indices 0..n-1 under a
/// Matern-3/2 kernel plus white noise, with the constant mean profiled out
/// by generalised least squares. Fills `grad` (same length as params) when
/// non-empty. Returns +inf when the covariance is not positive definite.
double nlml_plain(std::span<const double> y, std::span<const double> params,
                  std::span<double> grad = {}, double jitter = 1e-8,
                  double* mean_out = nullptr);

/// As nlml_plain for the two-region kernel
/// (1 - s_i)(1 - s_j) k_a(i, j) + s_i s_j k_b(i, j),
/// s_i = sigmoid(steepness * (i - location)).
double nlml_changepoint(std::span<const double> y, std::span<const double> params,
                        std::span<double> grad = {}, double jitter = 1e-8,
                        double* mean_out = nullptr);

/// Fits are computed on standardise(window). Deterministic given seed.
GpFit fit_plain_gp(std::span<const double> window, std::uint64_t seed,
                   const GpOptions& options = {});
/// With `plain` given, both regions start from its hyperparameters.
GpFit fit_changepoint_gp(std::span<const double> window, std::uint64_t seed,
                         const GpOptions& options = {}, const GpFit* plain = nullptr);

struct CpdPoint {
  bool ok = false;
  double gamma = 0.5;
  double nu = 0.0;
  double location = 0.0;
  double nlml_plain = 0.0;
  double nlml_changepoint = 0.0;
};

inline constexpr double kFeatureFloor = 1e-6;

/// gamma = 1 - ((n - 1) - location) / n and nu = 1 - exp(-max(0, delta) / n),
/// both clamped to [1e-6, 1 - 1e-6].
CpdPoint cpd_window(std::span<const double> returns, std::uint64_t seed,
                    const GpOptions& options = {});

/// One row per date t with lbw daily returns ending at t (fit failures
/// omitted). Dates already present in `resume` are copied, not refit.
/// Window seeds are derived from (seed, date index), so the output does
/// not depend on `threads`.
CpdFeatures cpd_features(const marketdata::PriceSeries& series, std::size_t lbw,
                         std::uint64_t seed = 0, const GpOptions& options = {},
                         unsigned threads = 1, const CpdFeatures* resume = nullptr);

void write_cpd_cache(const std::filesystem::path& path, std::span<const CpdFeatures> sets);
/// Groups rows by (symbol, lbw), ordered by symbol then lbw.
std::vector<CpdFeatures> read_cpd_cache(const std::filesystem::path& path);

}  // namespace momtx::cpd
