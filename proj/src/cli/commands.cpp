// SPDX-License-Identifier: Apache-2.0
#include "momtx/cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "momtx/backtest/backtest.hpp"
#include "momtx/cpd/cpd.hpp"
#include "momtx/errors.hpp"
#include "momtx/interpret/interpret.hpp"
#include "momtx/marketdata/csv.hpp"
#include "momtx/marketdata/price_series.hpp"
#include "momtx/training/training.hpp"

namespace momtx::cli {

namespace fs = std::filesystem;
using features::FeaturePanel;
using marketdata::format_date;
using marketdata::PriceSeries;
using ordered_json = nlohmann::ordered_json;

inline constexpr int kManifestVersion = 1;

namespace {

void require_file(const fs::path& path, std::string_view what) {
  if (!fs::is_regular_file(path)) {
    throw ConfigError(fmt::format("{} not found: {}", what, path.string()));
  }
}

std::vector<PriceSeries> load_prices(const RunConfig& config) {
  require_file(config.prices_path(), "prices");
  require_file(config.metadata_path(), "metadata");
  auto series = marketdata::load_csv(config.prices_path(), config.metadata_path());
  if (series.empty()) throw DataError(fmt::format("{} holds no prices", config.prices_path().string()));
  if (config.winsorise) {
    for (auto& s : series) {
      if (s.size() >= 2) s = marketdata::winsorise(s);
    }
  }
  return series;
}

std::vector<std::string> model_columns(const FeaturePanel& panel, const RunConfig& config) {
  std::vector<std::string> cols;
  for (const auto& c : panel.columns) {
    if (c.rfind("cpd_", 0) != 0) cols.push_back(c);
  }
  if (uses_cpd(config.model)) {
    for (std::size_t l : config.cpd_lbws) {
      for (const char* name : {"cpd_nu_", "cpd_gamma_"}) {
        const std::string col = fmt::format("{}{}", name, l);
        if (std::find(panel.columns.begin(), panel.columns.end(), col) == panel.columns.end()) {
          throw ConfigError(fmt::format(
              "feature panel {} has no column {}; run `momtx cpd` and then `momtx features "
              "--with-cpd` first",
              panel.asset_id, col));
        }
        cols.push_back(col);
      }
    }
  }
  return cols;
}

std::string range_text(marketdata::DateRange r) {
  return fmt::format("{}..{}", format_date(r.begin), format_date(r.end));
}

ordered_json range_json(marketdata::DateRange r) {
  return ordered_json::array({format_date(r.begin), format_date(r.end)});
}

marketdata::DateRange range_from_json(const nlohmann::json& j) {
  return {marketdata::parse_date(j.at(0).get<std::string>()),
          marketdata::parse_date(j.at(1).get<std::string>())};
}

struct SplitEntry {
  std::size_t index = 0;
  marketdata::WindowSplit split;
  fs::path checkpoint;
};

struct Manifest {
  ModelVariant model = ModelVariant::kTft;
  std::size_t seq_len = 0;
  std::vector<std::string> columns;
  std::vector<SplitEntry> splits;
};

Manifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  if (!fs::is_regular_file(path)) {
    throw ConfigError(fmt::format("no trained models at {}; run `momtx train` first", dir.string()));
  }
  std::ifstream in(path);
  Manifest m;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format_version").get<int>() != kManifestVersion) {
      throw ConfigError(fmt::format("{}: unsupported manifest version", path.string()));
    }
    m.model = parse_model_variant(j.at("model").get<std::string>());
    m.seq_len = j.at("seq_len").get<std::size_t>();
    m.columns = j.at("features").get<std::vector<std::string>>();
    for (const auto& s : j.at("splits")) {
      SplitEntry e;
      e.index = s.at("index").get<std::size_t>();
      e.split.train = range_from_json(s.at("train"));
      e.split.valid = range_from_json(s.at("valid"));
      e.split.test = range_from_json(s.at("test"));
      e.checkpoint = dir / s.at("checkpoint").get<std::string>();
      m.splits.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
  if (m.splits.empty()) throw ConfigError(fmt::format("{} lists no trained split", path.string()));
  return m;
}

model::Model load_checkpoint(const Manifest& manifest, const SplitEntry& entry) {
  require_file(entry.checkpoint, "checkpoint");
  model::Model net = model::Model::load(entry.checkpoint);
  if (net.kind() != kind_of(manifest.model) || net.dims().seq_len != manifest.seq_len ||
      net.dims().n_inputs != manifest.columns.size()) {
    throw ConfigError(fmt::format("checkpoint {} does not match the manifest",
                                  entry.checkpoint.string()));
  }
  return net;
}

std::vector<FeaturePanel> manifest_panels(const RunConfig& config, const Manifest& manifest) {
  std::vector<FeaturePanel> out;
  for (const auto& p : load_panels(config.features_path())) {
    out.push_back(select_columns(p, manifest.columns));
  }
  return out;
}

std::vector<FeaturePanel> restrict_all(std::span<const FeaturePanel> panels,
                                       marketdata::DateRange range) {
  std::vector<FeaturePanel> out;
  for (const auto& p : panels) out.push_back(training::restrict_panel(p, range));
  return out;
}

void append(std::map<std::string, backtest::PositionSeries>& acc,
            std::span<const backtest::PositionSeries> add) {
  for (const auto& s : add) {
    auto& dst = acc[s.asset_id];
    dst.asset_id = s.asset_id;
    dst.dates.insert(dst.dates.end(), s.dates.begin(), s.dates.end());
    dst.positions.insert(dst.positions.end(), s.positions.begin(), s.positions.end());
  }
}

std::vector<backtest::PositionSeries> values_of(
    const std::map<std::string, backtest::PositionSeries>& m) {
  std::vector<backtest::PositionSeries> out;
  for (const auto& [id, s] : m) {
    if (s.size() > 0) out.push_back(s);
  }
  return out;
}

}  // namespace

std::vector<FeaturePanel> load_panels(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw ConfigError(fmt::format("feature directory not found: {}; run `momtx features` first",
                                  dir.string()));
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw ConfigError(fmt::format("no feature panels in {}; run `momtx features` first",
                                  dir.string()));
  }
  std::vector<FeaturePanel> out;
  for (const auto& f : files) out.push_back(features::read_panel_csv(f));
  return out;
}

FeaturePanel select_columns(const FeaturePanel& panel, const std::vector<std::string>& columns) {
  std::vector<std::size_t> idx;
  for (const auto& c : columns) {
    auto it = std::find(panel.columns.begin(), panel.columns.end(), c);
    if (it == panel.columns.end()) {
      throw ConfigError(fmt::format("feature panel {} has no column {}", panel.asset_id, c));
    }
    idx.push_back(static_cast<std::size_t>(it - panel.columns.begin()));
  }
  FeaturePanel out = panel;
  out.columns = columns;
  out.values.clear();
  out.values.reserve(panel.rows() * columns.size());
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    for (std::size_t i : idx) out.values.push_back(panel.at(r, i));
  }
  return out;
}

void cmd_synth(const RunConfig& config, std::ostream& log) {
  config.validate();
  marketdata::SynthSpec spec = config.synth;
  spec.seed = config.seed;
  const auto data = marketdata::synth_generate(spec);
  fs::create_directories(config.out);
  marketdata::write_prices_csv(config.prices_path(), data.series);
  marketdata::write_metadata_csv(config.metadata_path(), data.series);
  marketdata::write_regimes_csv(config.out / "regimes.csv", data.regimes);
  log << fmt::format("synth: {} assets x {} days -> {}\n", spec.n_assets, spec.n_days,
                     config.prices_path().string());
}

void cmd_cpd(const RunConfig& config, const CpdOptions& options, std::ostream& log) {
  config.validate();
  const auto series = load_prices(config);
  std::vector<cpd::CpdFeatures> previous;
  if (options.resume && fs::is_regular_file(config.cpd_path())) {
    previous = cpd::read_cpd_cache(config.cpd_path());
  }
  std::vector<cpd::CpdFeatures> sets;
  std::size_t reused = 0;
  for (const auto& s : series) {
    for (std::size_t lbw : config.cpd_lbws) {
      const cpd::CpdFeatures* resume = nullptr;
      for (const auto& p : previous) {
        if (p.asset_id == s.asset_id && p.lbw == lbw) resume = &p;
      }
      if (resume) reused += resume->dates.size();
      sets.push_back(cpd::cpd_features(s, lbw, config.seed, {},
                                       static_cast<unsigned>(config.cpd_threads), resume));
      if (sets.back().dates.empty()) {
        log << fmt::format("warning: {} has {} prices, too few for lookback {}; no CPD rows\n",
                           s.asset_id, s.size(), lbw);
      }
    }
  }
  if (!config.cpd_path().parent_path().empty()) fs::create_directories(config.cpd_path().parent_path());
  cpd::write_cpd_cache(config.cpd_path(), sets);
  std::size_t rows = 0;
  for (const auto& s : sets) rows += s.dates.size();
  log << fmt::format("cpd: {} rows ({} reused) -> {}\n", rows, reused, config.cpd_path().string());
}

void cmd_features(const RunConfig& config, const FeatureOptions& options, std::ostream& log) {
  config.validate();
  const auto series = load_prices(config);
  std::vector<cpd::CpdFeatures> cache;
  if (options.with_cpd) {
    if (!fs::is_regular_file(config.cpd_path())) {
      throw ConfigError(fmt::format("CPD cache not found at {}; run `momtx cpd` first",
                                    config.cpd_path().string()));
    }
    cache = cpd::read_cpd_cache(config.cpd_path());
  }
  std::vector<FeaturePanel> panels;
  for (const auto& s : series) {
    std::vector<cpd::CpdFeatures> mine;
    if (options.with_cpd) {
      for (std::size_t lbw : config.cpd_lbws) {
        auto it = std::find_if(cache.begin(), cache.end(), [&](const cpd::CpdFeatures& c) {
          return c.asset_id == s.asset_id && c.lbw == lbw;
        });
        if (it == cache.end()) {
          throw ConfigError(fmt::format(
              "CPD cache {} has no rows for {} at lookback {}; run `momtx cpd` first",
              config.cpd_path().string(), s.asset_id, lbw));
        }
        mine.push_back(*it);
      }
    }
    panels.push_back(features::build_feature_panel(s, {}, mine));
  }
  const fs::path dir = config.features_path();
  fs::create_directories(dir);
  for (const auto& p : panels) {
    features::write_panel_csv(dir / (p.asset_id + ".csv"), p);
    if (p.rows() == 0) log << fmt::format("warning: {} has no complete feature row\n", p.asset_id);
  }
  log << fmt::format("features: {} panels -> {}\n", panels.size(), dir.string());
}

void cmd_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  if (!config.splits) throw ConfigError("train needs a splits section in the config");
  const auto raw = load_panels(config.features_path());
  const std::vector<std::string> columns = model_columns(raw.front(), config);
  std::vector<FeaturePanel> panels;
  for (const auto& p : raw) panels.push_back(select_columns(p, columns));

  const auto splits = marketdata::expanding_windows(
      {config.splits->begin, config.splits->end}, config.splits->step_years,
      config.splits->first_test_year);
  const training::TrainConfig tc = config.train_config();
  const training::Grid grid = config.search_grid();
  const std::size_t tau = tc.seq_len;

  struct Plan {
    std::size_t index;
    marketdata::WindowSplit split;
    std::vector<FeaturePanel> train, valid;
  };
  std::vector<Plan> plans;
  for (std::size_t k = 0; k < splits.size(); ++k) {
    Plan plan{k, splits[k], {}, {}};
    for (const auto& p : panels) {
      auto tr = training::restrict_panel(p, splits[k].train);
      auto va = training::restrict_panel(p, splits[k].valid);
      if (va.rows() < tau || tr.rows() < tau) continue;
      plan.train.push_back(std::move(tr));
      plan.valid.push_back(std::move(va));
    }
    if (plan.train.empty()) {
      log << fmt::format("warning: split {} ({}) has no asset with {} validation rows; skipped\n",
                         k, marketdata::describe(splits[k]), tau);
      continue;
    }
    plans.push_back(std::move(plan));
  }
  if (plans.empty()) {
    throw ConfigError(fmt::format("no split has an asset with {} training and validation rows", tau));
  }

  const fs::path dir = config.models_path();
  fs::create_directories(dir);
  ordered_json manifest;
  manifest["format_version"] = kManifestVersion;
  manifest["model"] = std::string(to_string(config.model));
  manifest["seq_len"] = tau;
  manifest["stride"] = tc.stride;
  manifest["seed"] = config.seed;
  manifest["features"] = columns;
  manifest["splits"] = ordered_json::array();
  for (const Plan& plan : plans) {
    log << fmt::format("train: split {} ({}), {} assets, {} trials\n", plan.index,
                       marketdata::describe(plan.split), plan.train.size(),
                       std::min(config.train.n_iter, grid.points(tc.kind).size()));
    training::TrainConfig split_config = tc;
    split_config.seed = training::trial_seed(config.seed, 1000003 + plan.index);
    auto result = training::random_search(grid, config.train.n_iter, plan.train, plan.valid,
                                          split_config, split_config.seed, config.train.threads);
    const std::string ckpt = fmt::format("split_{}.ckpt", plan.index);
    const std::string ledger = fmt::format("split_{}_trials.csv", plan.index);
    result.best_model.save(dir / ckpt);
    training::write_trial_ledger(dir / ledger, result.trials);
    const auto& best = result.trials[result.best_trial];
    ordered_json entry;
    entry["index"] = plan.index;
    entry["train"] = range_json(plan.split.train);
    entry["valid"] = range_json(plan.split.valid);
    entry["test"] = range_json(plan.split.test);
    entry["checkpoint"] = ckpt;
    entry["ledger"] = ledger;
    std::vector<std::string> assets;
    for (const auto& p : plan.train) assets.push_back(p.asset_id);
    entry["assets"] = assets;
    entry["best_trial"] = best.trial_id;
    entry["val_sharpe"] = best.val_sharpe;
    entry["hp"] = ordered_json::parse(best.hp.to_json());
    manifest["splits"].push_back(entry);
    log << fmt::format("train: split {} best trial {} validation Sharpe {:.4f}\n", plan.index,
                       best.trial_id, best.val_sharpe);
  }
  marketdata::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

void cmd_backtest(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Manifest manifest = read_manifest(config.models_path());
  const auto panels = manifest_panels(config, manifest);
  std::vector<model::Model> models;
  for (const auto& e : manifest.splits) models.push_back(load_checkpoint(manifest, e));

  marketdata::DateRange covered{manifest.splits.front().split.test.begin,
                                manifest.splits.front().split.test.end};
  for (const auto& e : manifest.splits) {
    covered.begin = std::min(covered.begin, e.split.test.begin);
    covered.end = std::max(covered.end, e.split.test.end);
  }
  std::vector<Scenario> scenarios = config.scenarios;
  if (scenarios.empty()) scenarios.push_back({"all", covered});
  for (const Scenario& s : scenarios) {
    if (s.range.begin < covered.begin || s.range.end > covered.end) {
      throw ConfigError(fmt::format("scenario '{}' ({}) is not covered by the trained test ranges {}",
                                    s.name, range_text(s.range), range_text(covered)));
    }
    bool any = false;
    for (const auto& p : panels) {
      for (Date d : p.dates) any = any || s.range.contains(d);
    }
    if (!any) throw ConfigError(fmt::format("scenario '{}' has an empty test range", s.name));
  }

  std::map<std::string, backtest::PositionSeries> model_pos, long_pos, tsmom_pos;
  for (std::size_t i = 0; i < manifest.splits.size(); ++i) {
    const auto test = restrict_all(panels, manifest.splits[i].split.test);
    append(model_pos, training::predict_positions(models[i], test));
    append(long_pos, backtest::baseline_long_only(test));
    append(tsmom_pos, backtest::baseline_tsmom(test));
  }
  const std::vector<std::pair<std::string, std::vector<backtest::PositionSeries>>> strategies{
      {strategy_label(manifest.model), values_of(model_pos)},
      {"Long-Only", values_of(long_pos)},
      {"TSMOM", values_of(tsmom_pos)}};

  const fs::path dir = config.out / "reports";
  std::vector<backtest::ReportRow> rows;
  std::vector<std::pair<std::string, std::vector<backtest::EquityCurve>>> curves;
  for (const Scenario& s : scenarios) {
    std::vector<backtest::EquityCurve> scenario_curves;
    for (const auto& [name, positions] : strategies) {
      const auto restricted = backtest::restrict(positions, s.range);
      auto sweep = backtest::cost_sweep(name, s.name, restricted, panels);
      rows.insert(rows.end(), sweep.begin(), sweep.end());
      scenario_curves.push_back({name, backtest::portfolio_returns(restricted, panels)});
    }
    curves.emplace_back(s.name, std::move(scenario_curves));
  }
  fs::create_directories(dir);
  backtest::write_report_csv(dir / "report.csv", rows);
  backtest::write_report_json(dir / "report.json", rows);
  for (const auto& [name, c] : curves) {
    backtest::write_equity_csv(dir / fmt::format("equity_{}.csv", name), c);
  }
  for (const auto& row : rows) {
    if (row.cost_bps != 0.0) continue;
    log << fmt::format("backtest: {:<10} {:<12} Sharpe {}\n", row.strategy, row.scenario,
                       row.metrics.sharpe ? fmt::format("{:.3f}", *row.metrics.sharpe) : "n/a");
  }
}

void cmd_interpret(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Manifest manifest = read_manifest(config.models_path());
  if (kind_of(manifest.model) != model::ModelKind::kTft) {
    throw ConfigError(fmt::format("interpretability requires TFT; the trained model is {}",
                                  to_string(manifest.model)));
  }
  const SplitEntry* entry = &manifest.splits.back();
  if (config.interpret_split) {
    auto it = std::find_if(manifest.splits.begin(), manifest.splits.end(),
                           [&](const SplitEntry& e) { return e.index == *config.interpret_split; });
    if (it == manifest.splits.end()) {
      throw ConfigError(fmt::format("split {} was not trained", *config.interpret_split));
    }
    entry = &*it;
  }
  const marketdata::DateRange test = entry->split.test;
  const model::Model net = load_checkpoint(manifest, *entry);
  if (net.kind() != model::ModelKind::kTft) {
    throw ConfigError("interpretability requires TFT; the checkpoint holds an LSTM");
  }
  const auto panels = manifest_panels(config, manifest);

  std::optional<Date> date = config.interpret_date;
  if (date && !test.contains(*date)) {
    throw ConfigError(fmt::format("--date {} lies outside the test range {}", format_date(*date),
                                  range_text(test)));
  }
  if (!date) {
    for (const auto& p : panels) {
      for (Date d : p.dates) {
        if (test.contains(d) && (!date || d > *date)) date = d;
      }
    }
    if (!date) throw ConfigError(fmt::format("test range {} holds no data", range_text(test)));
  }
  const std::size_t tau = net.dims().seq_len;
  std::vector<interpret::AttentionMap> maps;
  for (const auto& p : panels) {
    auto it = std::lower_bound(p.dates.begin(), p.dates.end(), *date);
    if (it == p.dates.end() || *it != *date) continue;
    if (static_cast<std::size_t>(it - p.dates.begin()) + 1 < tau) continue;
    maps.push_back(interpret::extract_attention(net, p, *date));
  }
  if (maps.empty()) {
    throw ConfigError(fmt::format("no asset has a complete {}-day window ending {}", tau,
                                  format_date(*date)));
  }
  const auto importance =
      interpret::extract_variable_importance(net, restrict_all(panels, test), test);

  const fs::path dir = config.out / "interpret";
  fs::create_directories(dir);
  interpret::write_importance_csv(dir / "variable_importance.csv", importance);
  interpret::write_importance_summary_csv(dir / "variable_importance_summary.csv", importance);
  interpret::write_attention_csv(dir / "attention.csv", maps);
  interpret::write_attention_heads_csv(dir / "attention_heads.csv", maps);
  log << fmt::format("interpret: split {} ({}), attention on {} for {} assets -> {}\n",
                     entry->index, range_text(test), format_date(*date), maps.size(),
                     dir.string());
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Momentum Transformer pipeline"};
  app.require_subcommand(1);

  struct Common {
    std::string config, out;
    std::optional<std::uint64_t> seed;
  };
  std::map<std::string, Common> common;
  auto add_common = [&](CLI::App* sub) {
    Common& c = common[sub->get_name()];
    sub->add_option("--config", c.config, "JSON run configuration");
    sub->add_option("--seed", c.seed, "Master seed");
    sub->add_option("--out", c.out, "Output directory");
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate synthetic regime-switching prices");
  CLI::App* cpd = app.add_subcommand("cpd", "Precompute changepoint features");
  CLI::App* feats = app.add_subcommand("features", "Build feature panels");
  CLI::App* train = app.add_subcommand("train", "Train models per expanding-window split");
  CLI::App* bt = app.add_subcommand("backtest", "Backtest trained models and baselines");
  CLI::App* interp = app.add_subcommand("interpret", "Export variable importance and attention");
  for (CLI::App* sub : {synth, cpd, feats, train, bt, interp}) add_common(sub);

  CpdOptions cpd_options;
  std::optional<std::size_t> cpd_threads;
  cpd->add_flag("--resume", cpd_options.resume, "Reuse rows already in the cache");
  cpd->add_option("--threads", cpd_threads, "Worker threads");

  FeatureOptions feature_options;
  feats->add_flag("--with-cpd", feature_options.with_cpd, "Append cached CPD features");

  std::optional<std::string> model_name;
  std::optional<std::size_t> seq_len, n_iter, max_epochs, train_threads;
  train->add_option("--model", model_name, "lstm, tft or tft_cpd");
  train->add_option("--seq-len", seq_len, "Input sequence length");
  train->add_option("--n-iter", n_iter, "Random search iterations");
  train->add_option("--max-epochs", max_epochs, "Epoch limit per trial");
  train->add_option("--threads", train_threads, "Concurrent trials");

  std::optional<std::string> date_text;
  std::optional<std::size_t> split_index;
  interp->add_option("--date", date_text, "Prediction date for attention (YYYY-MM-DD)");
  interp->add_option("--split", split_index, "Split index (default: last)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  const Common& c = common[active->get_name()];
  try {
    RunConfig config = c.config.empty() ? RunConfig{} : load_config(c.config);
    if (!c.out.empty()) config.out = c.out;
    if (c.seed) config.seed = *c.seed;
    if (cpd_threads) config.cpd_threads = *cpd_threads;
    if (model_name) config.model = parse_model_variant(*model_name);
    if (seq_len) config.train.seq_len = *seq_len;
    if (n_iter) config.train.n_iter = *n_iter;
    if (max_epochs) config.train.max_epochs = *max_epochs;
    if (train_threads) config.train.threads = *train_threads;
    if (date_text) {
      try {
        config.interpret_date = marketdata::parse_date(*date_text);
      } catch (const std::exception& e) {
        throw ConfigError(fmt::format("--date: {}", e.what()));
      }
    }
    if (split_index) config.interpret_split = *split_index;

    if (active == synth) cmd_synth(config, err);
    if (active == cpd) cmd_cpd(config, cpd_options, err);
    if (active == feats) cmd_features(config, feature_options, err);
    if (active == train) cmd_train(config, err);
    if (active == bt) cmd_backtest(config, err);
    if (active == interp) cmd_interpret(config, err);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace momtx::cli
