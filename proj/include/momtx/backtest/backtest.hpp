// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "momtx/features/features.hpp"
#include "momtx/marketdata/splits.hpp"

namespace momtx::backtest {

using marketdata::Date;

inline constexpr double kSigmaTarget = 0.15;
/// Largest admissible position magnitude; positions live in (-1, 1).
inline constexpr double kMaxPosition = 1.0 - 1e-9;

struct PositionSeries {
  std::string asset_id;
  std::vector<Date> dates;
  std::vector<double> positions;

  std::size_t size() const noexcept { return dates.size(); }
  /// Throws DataError on misaligned sizes, unordered dates or |X| >= 1.
  void validate() const;
};

/// Daily strategy returns keyed by the date the position was taken.
struct ReturnSeries {
  std::vector<Date> dates;
  std::vector<double> returns;
};

struct CostModel {
  double basis_points = 0.0;

  double fraction() const noexcept { return basis_points * 1e-4; }
};

/// R = X * (sigma_target / sigma) * r, elementwise, sigma annualised.
std::vector<double> captured_returns(std::span<const double> positions,
                                     std::span<const double> fwd_returns,
                                     std::span<const double> sigma_annualised,
                                     double sigma_target = kSigmaTarget);

/// R - C * sigma_target * |X_t / sigma_t - X_{t-1} / sigma_{t-1}|, with a
/// flat position before the first day.
std::vector<double> apply_costs(std::span<const double> returns,
                                std::span<const double> positions,
                                std::span<const double> sigma_annualised,
                                double sigma_target, CostModel cost);

/// Net captured returns of one asset over the dates where the position has
/// a panel row with a defined forward return.
ReturnSeries asset_returns(const PositionSeries& positions,
                           const features::FeaturePanel& panel,
                           double sigma_target = kSigmaTarget, CostModel cost = {});

/// Equal-weighted average over the assets live on each date. Panels are
/// matched to position series by asset id.
ReturnSeries portfolio_returns(std::span<const PositionSeries> positions,
                               std::span<const features::FeaturePanel> panels,
                               double sigma_target = kSigmaTarget, CostModel cost = {});

/// Exhibit metric set. Metrics whose denominator vanishes are empty.
struct Metrics {
  std::optional<double> annual_return;
  std::optional<double> annual_volatility;
  std::optional<double> sharpe;
  std::optional<double> downside_deviation;
  std::optional<double> sortino;
  std::optional<double> max_drawdown;
  std::optional<double> calmar;
  std::optional<double> pct_positive;
  std::optional<double> profit_loss_ratio;
};

/// Throws ContractError for fewer than two returns.
Metrics compute_metrics(std::span<const double> returns);

/// Annualised Sharpe with population deviation; 0 when the deviation is 0.
double sharpe_ratio(std::span<const double> returns);

/// Population standard deviation times sqrt(252).
double annualised_volatility(std::span<const double> returns);

/// Multiplies by sigma_target / realised annualised vol. Throws DomainError
/// for a zero-volatility series.
std::vector<double> rescale_to_target_vol(std::span<const double> returns,
                                          double sigma_target = kSigmaTarget);

/// Compounded value path starting at `start`, one entry per return plus the
/// initial value.
std::vector<double> equity_curve(std::span<const double> returns, double start = 100.0);

std::vector<PositionSeries> baseline_long_only(std::span<const features::FeaturePanel> panels);

/// Sign of the trailing 252-day return, scaled into the open interval.
std::vector<PositionSeries> baseline_tsmom(std::span<const features::FeaturePanel> panels);

/// Positions restricted to [begin, end).
std::vector<PositionSeries> restrict(std::span<const PositionSeries> positions,
                                     marketdata::DateRange range);

struct ReportRow {
  std::string strategy;
  std::string scenario;
  double cost_bps = 0.0;
  Metrics metrics;
};

/// Cost sweep rows for one strategy, C = 0, 0.5, ..., 3 bps.
std::vector<ReportRow> cost_sweep(const std::string& strategy, const std::string& scenario,
                                  std::span<const PositionSeries> positions,
                                  std::span<const features::FeaturePanel> panels,
                                  double sigma_target = kSigmaTarget);

std::vector<double> default_cost_grid();

void write_report_csv(const std::filesystem::path& path, std::span<const ReportRow> rows);
void write_report_json(const std::filesystem::path& path, std::span<const ReportRow> rows);

struct EquityCurve {
  std::string strategy;
  ReturnSeries returns;
};

/// CSV `date,strategy,cumulative_value`; each curve is rescaled to the
/// target volatility and starts at 100.
void write_equity_csv(const std::filesystem::path& path, std::span<const EquityCurve> curves,
                      double sigma_target = kSigmaTarget);

}  // namespace momtx::backtest
