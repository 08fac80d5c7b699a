// SPDX-License-Identifier: Apache-2.0
#include "momtx/backtest/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "momtx/errors.hpp"
#include "momtx/marketdata/csv.hpp"

namespace momtx::backtest {

namespace {

void check_sizes(std::size_t a, std::size_t b, std::size_t c, const char* what) {
  if (a != b || a != c) {
    throw DimensionError(fmt::format("{}: series lengths {}, {}, {}", what, a, b, c));
  }
}

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double population_std(std::span<const double> x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

std::optional<double> ratio(double num, double den) {
  if (den > 0.0) return num / den;
  return std::nullopt;
}

double sign_position(double trailing) {
  if (trailing > 0.0) return kMaxPosition;
  if (trailing < 0.0) return -kMaxPosition;
  return 0.0;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? fmt::format("{}", *v) : std::string();
}

}  // namespace

void PositionSeries::validate() const {
  if (dates.size() != positions.size()) {
    throw DataError(fmt::format("positions {}: {} dates vs {} values", asset_id, dates.size(),
                                positions.size()));
  }
  for (std::size_t i = 0; i < dates.size(); ++i) {
    if (i > 0 && !(dates[i - 1] < dates[i])) {
      throw DataError(fmt::format("positions {}: dates not increasing", asset_id));
    }
    if (!(std::abs(positions[i]) < 1.0)) {
      throw DataError(fmt::format("positions {}: {} outside (-1, 1)", asset_id, positions[i]));
    }
  }
}

std::vector<double> captured_returns(std::span<const double> positions,
                                     std::span<const double> fwd_returns,
                                     std::span<const double> sigma_annualised,
                                     double sigma_target) {
  check_sizes(positions.size(), fwd_returns.size(), sigma_annualised.size(),
              "captured_returns");
  std::vector<double> out(positions.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(sigma_annualised[i] > 0.0)) throw DomainError("captured_returns: sigma must be positive");
    out[i] = positions[i] * (sigma_target / sigma_annualised[i]) * fwd_returns[i];
  }
  return out;
}

std::vector<double> apply_costs(std::span<const double> returns,
                                std::span<const double> positions,
                                std::span<const double> sigma_annualised,
                                double sigma_target, CostModel cost) {
  check_sizes(returns.size(), positions.size(), sigma_annualised.size(), "apply_costs");
  if (!(cost.basis_points >= 0.0)) throw DomainError("apply_costs: cost must be non-negative");
  std::vector<double> out(returns.begin(), returns.end());
  const double c = cost.fraction();
  if (c == 0.0) return out;
  double previous = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double scaled = positions[i] / sigma_annualised[i];
    out[i] -= c * sigma_target * std::abs(scaled - previous);
    previous = scaled;
  }
  return out;
}

ReturnSeries asset_returns(const PositionSeries& positions, const features::FeaturePanel& panel,
                           double sigma_target, CostModel cost) {
  if (positions.asset_id != panel.asset_id) {
    throw AlignmentError(fmt::format("positions for {} against panel {}", positions.asset_id,
                                     panel.asset_id));
  }
  std::vector<Date> dates;
  std::vector<double> x, r, sigma;
  std::size_t row = 0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    while (row < panel.rows() && panel.dates[row] < positions.dates[i]) ++row;
    if (row == panel.rows() || panel.dates[row] != positions.dates[i]) {
      throw AlignmentError(fmt::format("positions for {} on {} have no panel row",
                                       positions.asset_id,
                                       marketdata::format_date(positions.dates[i])));
    }
    if (!features::is_defined(panel.fwd_ret[row])) continue;
    dates.push_back(positions.dates[i]);
    x.push_back(positions.positions[i]);
    r.push_back(panel.fwd_ret[row]);
    sigma.push_back(panel.sigma_daily[row] * std::sqrt(features::kTradingDays));
  }
  ReturnSeries out;
  out.returns = apply_costs(captured_returns(x, r, sigma, sigma_target), x, sigma,
                            sigma_target, cost);
  out.dates = std::move(dates);
  return out;
}

ReturnSeries portfolio_returns(std::span<const PositionSeries> positions,
                               std::span<const features::FeaturePanel> panels,
                               double sigma_target, CostModel cost) {
  std::map<std::string, const features::FeaturePanel*> by_id;
  for (const auto& p : panels) by_id[p.asset_id] = &p;
  std::map<Date, std::pair<double, std::size_t>> pooled;
  for (const auto& pos : positions) {
    auto it = by_id.find(pos.asset_id);
    if (it == by_id.end()) {
      throw AlignmentError(fmt::format("no panel for positions of {}", pos.asset_id));
    }
    ReturnSeries r = asset_returns(pos, *it->second, sigma_target, cost);
    for (std::size_t i = 0; i < r.dates.size(); ++i) {
      auto& slot = pooled[r.dates[i]];
      slot.first += r.returns[i];
      slot.second += 1;
    }
  }
  ReturnSeries out;
  for (const auto& [date, slot] : pooled) {
    out.dates.push_back(date);
    out.returns.push_back(slot.first / static_cast<double>(slot.second));
  }
  return out;
}

double annualised_volatility(std::span<const double> returns) {
  if (returns.empty()) throw ContractError("annualised_volatility: empty series");
  return std::sqrt(features::kTradingDays) * population_std(returns);
}

double sharpe_ratio(std::span<const double> returns) {
  if (returns.empty()) throw ContractError("sharpe_ratio: empty series");
  const double sd = population_std(returns);
  if (!(sd > 0.0)) return 0.0;
  return std::sqrt(features::kTradingDays) * mean_of(returns) / sd;
}

Metrics compute_metrics(std::span<const double> returns) {
  if (returns.size() < 2) throw ContractError("compute_metrics: need at least two returns");
  Metrics m;
  const double ann_return = features::kTradingDays * mean_of(returns);
  const double ann_vol = annualised_volatility(returns);
  m.annual_return = ann_return;
  m.annual_volatility = ann_vol;
  m.sharpe = ratio(ann_return, ann_vol);

  std::vector<double> negatives, positives;
  for (double r : returns) {
    if (r < 0.0) negatives.push_back(r);
    if (r > 0.0) positives.push_back(r);
  }
  if (!negatives.empty()) {
    m.downside_deviation = std::sqrt(features::kTradingDays) * population_std(negatives);
    m.sortino = ratio(ann_return, *m.downside_deviation);
  }

  double value = 1.0, peak = 1.0, mdd = 0.0;
  for (double r : returns) {
    value *= 1.0 + r;
    peak = std::max(peak, value);
    mdd = std::max(mdd, (peak - value) / peak);
  }
  m.max_drawdown = mdd;
  m.calmar = ratio(ann_return, mdd);

  m.pct_positive = static_cast<double>(positives.size()) / static_cast<double>(returns.size());
  if (!positives.empty() && !negatives.empty()) {
    m.profit_loss_ratio = mean_of(positives) / std::abs(mean_of(negatives));
  }
  return m;
}

std::vector<double> rescale_to_target_vol(std::span<const double> returns, double sigma_target) {
  const double vol = annualised_volatility(returns);
  if (!(vol > 0.0)) throw DomainError("rescale_to_target_vol: zero realised volatility");
  std::vector<double> out(returns.begin(), returns.end());
  for (double& r : out) r *= sigma_target / vol;
  return out;
}

std::vector<double> equity_curve(std::span<const double> returns, double start) {
  std::vector<double> out{start};
  out.reserve(returns.size() + 1);
  for (double r : returns) out.push_back(out.back() * (1.0 + r));
  return out;
}

std::vector<PositionSeries> baseline_long_only(std::span<const features::FeaturePanel> panels) {
  std::vector<PositionSeries> out;
  for (const auto& p : panels) {
    out.push_back({p.asset_id, p.dates, std::vector<double>(p.rows(), kMaxPosition)});
  }
  return out;
}

std::vector<PositionSeries> baseline_tsmom(std::span<const features::FeaturePanel> panels) {
  std::vector<PositionSeries> out;
  for (const auto& p : panels) {
    const std::size_t col = p.column_index("ret_252");
    PositionSeries s{p.asset_id, p.dates, std::vector<double>(p.rows())};
    for (std::size_t r = 0; r < p.rows(); ++r) s.positions[r] = sign_position(p.at(r, col));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<PositionSeries> restrict(std::span<const PositionSeries> positions,
                                     marketdata::DateRange range) {
  std::vector<PositionSeries> out;
  for (const auto& p : positions) {
    PositionSeries s{p.asset_id, {}, {}};
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (range.contains(p.dates[i])) {
        s.dates.push_back(p.dates[i]);
        s.positions.push_back(p.positions[i]);
      }
    }
    if (s.size() > 0) out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> default_cost_grid() {
  std::vector<double> out;
  for (int i = 0; i <= 6; ++i) out.push_back(0.5 * i);
  return out;
}

std::vector<ReportRow> cost_sweep(const std::string& strategy, const std::string& scenario,
                                  std::span<const PositionSeries> positions,
                                  std::span<const features::FeaturePanel> panels,
                                  double sigma_target) {
  std::vector<ReportRow> rows;
  for (double bps : default_cost_grid()) {
    ReturnSeries r = portfolio_returns(positions, panels, sigma_target, CostModel{bps});
    rows.push_back({strategy, scenario, bps, compute_metrics(r.returns)});
  }
  return rows;
}

void write_report_csv(const std::filesystem::path& path, std::span<const ReportRow> rows) {
  std::string text =
      "strategy,scenario,cost_bps,returns,volatility,sharpe,downside_deviation,sortino,mdd,"
      "calmar,pct_positive,avg_profit_over_avg_loss\n";
  for (const auto& r : rows) {
    const Metrics& m = r.metrics;
    text += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", r.strategy, r.scenario,
                        r.cost_bps, format_optional(m.annual_return),
                        format_optional(m.annual_volatility), format_optional(m.sharpe),
                        format_optional(m.downside_deviation), format_optional(m.sortino),
                        format_optional(m.max_drawdown), format_optional(m.calmar),
                        format_optional(m.pct_positive), format_optional(m.profit_loss_ratio));
  }
  marketdata::write_file_atomic(path, text);
}

void write_report_json(const std::filesystem::path& path, std::span<const ReportRow> rows) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    const Metrics& m = r.metrics;
    out.push_back({{"strategy", r.strategy},
                   {"scenario", r.scenario},
                   {"cost_bps", r.cost_bps},
                   {"returns", opt(m.annual_return)},
                   {"volatility", opt(m.annual_volatility)},
                   {"sharpe", opt(m.sharpe)},
                   {"downside_deviation", opt(m.downside_deviation)},
                   {"sortino", opt(m.sortino)},
                   {"mdd", opt(m.max_drawdown)},
                   {"calmar", opt(m.calmar)},
                   {"pct_positive", opt(m.pct_positive)},
                   {"avg_profit_over_avg_loss", opt(m.profit_loss_ratio)}});
  }
  marketdata::write_file_atomic(path, out.dump(2) + "\n");
}

void write_equity_csv(const std::filesystem::path& path, std::span<const EquityCurve> curves,
                      double sigma_target) {
  std::string text = "date,strategy,cumulative_value\n";
  for (const auto& c : curves) {
    if (c.returns.dates.empty()) continue;
    std::vector<double> scaled(c.returns.returns.begin(), c.returns.returns.end());
    if (annualised_volatility(scaled) > 0.0) scaled = rescale_to_target_vol(scaled, sigma_target);
    std::vector<double> values = equity_curve(scaled);
    for (std::size_t i = 0; i < c.returns.dates.size(); ++i) {
      text += fmt::format("{},{},{}\n", marketdata::format_date(c.returns.dates[i]), c.strategy,
                          values[i]);
    }
    Date next = c.returns.dates.back() + std::chrono::days(1);
    while (std::chrono::weekday(next) == std::chrono::Saturday ||
           std::chrono::weekday(next) == std::chrono::Sunday) {
      next += std::chrono::days(1);
    }
    text += fmt::format("{},{},{}\n", marketdata::format_date(next), c.strategy, values.back());
  }
  marketdata::write_file_atomic(path, text);
}

}  // namespace momtx::backtest
