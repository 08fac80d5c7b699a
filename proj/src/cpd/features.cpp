// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <map>
#include <thread>

#include <fmt/format.h>

#include "momtx/cpd/cpd.hpp"
#include "momtx/errors.hpp"

namespace momtx::cpd {

namespace {

std::uint64_t window_seed(std::uint64_t seed, std::size_t t) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(t) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

CpdFeatures cpd_features(const marketdata::PriceSeries& series, std::size_t lbw, std::uint64_t seed,
                         const GpOptions& options, unsigned threads, const CpdFeatures* resume) {
  if (lbw < 3) throw ConfigError("cpd_features: lookback must be at least 3 days");
  CpdFeatures out;
  out.asset_id = series.asset_id;
  out.lbw = lbw;
  const std::size_t n = series.size();
  if (n <= lbw) return out;

  std::vector<double> returns(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) returns[t] = series.prices[t] / series.prices[t - 1] - 1.0;

  std::map<marketdata::Date, std::pair<double, double>> cached;
  if (resume) {
    if (resume->asset_id != series.asset_id || resume->lbw != lbw) {
      throw AlignmentError(fmt::format("resume data for {} (lbw {}) does not match {} (lbw {})",
                                       resume->asset_id, resume->lbw, series.asset_id, lbw));
    }
    for (std::size_t i = 0; i < resume->dates.size(); ++i) {
      cached.emplace(resume->dates[i], std::make_pair(resume->gamma[i], resume->nu[i]));
    }
  }

  const std::size_t first = lbw;
  std::vector<CpdPoint> points(n - first);
  std::vector<std::size_t> todo;
  for (std::size_t t = first; t < n; ++t) {
    auto it = cached.find(series.dates[t]);
    if (it != cached.end()) {
      points[t - first] = CpdPoint{true, it->second.first, it->second.second};
    } else {
      todo.push_back(t);
    }
  }
  auto work = [&](std::size_t worker, std::size_t stride) {
    for (std::size_t k = worker; k < todo.size(); k += stride) {
      const std::size_t t = todo[k];
      const std::span<const double> window(returns.data() + t + 1 - lbw, lbw);
      points[t - first] = cpd_window(window, window_seed(seed, t), options);
    }
  };
  const std::size_t n_threads = std::max(1u, threads);
  if (n_threads == 1 || todo.size() < 2) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(work, w, n_threads);
    for (auto& th : pool) th.join();
  }
  for (std::size_t t = first; t < n; ++t) {
    const CpdPoint& p = points[t - first];
    if (!p.ok) continue;
    out.dates.push_back(series.dates[t]);
    out.gamma.push_back(p.gamma);
    out.nu.push_back(p.nu);
  }
  return out;
}

void write_cpd_cache(const std::filesystem::path& path, std::span<const CpdFeatures> sets) {
  std::string text = "symbol,date,lbw,gamma,nu\n";
  for (const CpdFeatures& c : sets) {
    for (std::size_t i = 0; i < c.dates.size(); ++i) {
      text += fmt::format("{},{},{},{},{}\n", c.asset_id, marketdata::format_date(c.dates[i]), c.lbw,
                          c.gamma[i], c.nu[i]);
    }
  }
  marketdata::write_file_atomic(path, text);
}

std::vector<CpdFeatures> read_cpd_cache(const std::filesystem::path& path) {
  marketdata::CsvReader reader(path, {"symbol", "date", "lbw", "gamma", "nu"});
  std::map<std::pair<std::string, std::size_t>, std::map<marketdata::Date, std::pair<double, double>>> rows;
  std::vector<std::string> f;
  while (reader.next(f)) {
    const auto lbw = static_cast<std::size_t>(marketdata::parse_double(f[2], reader.line()));
    const auto date = marketdata::parse_date(f[1], reader.line());
    const double gamma = marketdata::parse_double(f[3], reader.line());
    const double nu = marketdata::parse_double(f[4], reader.line());
    if (!(gamma > 0.0 && gamma < 1.0 && nu > 0.0 && nu < 1.0)) {
      throw DataError(fmt::format("{} line {}: CPD values must lie in (0, 1)", path.string(), reader.line()));
    }
    if (!rows[{f[0], lbw}].emplace(date, std::make_pair(gamma, nu)).second) {
      throw DataError(fmt::format("{}: duplicate CPD row {} {} {}", path.string(), f[0], f[1], lbw));
    }
  }
  std::vector<CpdFeatures> out;
  for (auto& [key, bydate] : rows) {
    CpdFeatures c;
    c.asset_id = key.first;
    c.lbw = key.second;
    for (auto& [d, v] : bydate) {
      c.dates.push_back(d);
      c.gamma.push_back(v.first);
      c.nu.push_back(v.second);
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace momtx::cpd
