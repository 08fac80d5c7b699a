// SPDX-License-Identifier: Apache-2.0
#include "momtx/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "momtx/errors.hpp"
#include "momtx/marketdata/csv.hpp"

namespace momtx::cli {

using nlohmann::json;

std::string_view to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::kLstm:
      return "lstm";
    case ModelVariant::kTft:
      return "tft";
    case ModelVariant::kTftCpd:
      return "tft_cpd";
  }
  return "?";
}

ModelVariant parse_model_variant(std::string_view text) {
  if (text == "lstm") return ModelVariant::kLstm;
  if (text == "tft") return ModelVariant::kTft;
  if (text == "tft_cpd") return ModelVariant::kTftCpd;
  throw ConfigError(fmt::format("unknown model '{}'; expected one of lstm, tft, tft_cpd", text));
}

model::ModelKind kind_of(ModelVariant v) {
  return v == ModelVariant::kLstm ? model::ModelKind::kLstm : model::ModelKind::kTft;
}

bool uses_cpd(ModelVariant v) { return v == ModelVariant::kTftCpd; }

std::string strategy_label(ModelVariant v) {
  switch (v) {
    case ModelVariant::kLstm:
      return "LSTM";
    case ModelVariant::kTft:
      return "TFT";
    case ModelVariant::kTftCpd:
      return "TFT-CPD";
  }
  return "?";
}

training::Grid GridOverrides::apply(training::Grid grid) const {
  if (!batch_size.empty()) grid.batch_size = batch_size;
  if (!learning_rate.empty()) grid.learning_rate = learning_rate;
  if (!dropout.empty()) grid.dropout = dropout;
  if (!max_grad_norm.empty()) grid.max_grad_norm = max_grad_norm;
  if (!hidden.empty()) grid.hidden = hidden;
  if (!heads.empty()) grid.heads = heads;
  return grid;
}

std::size_t RunConfig::seq_len() const {
  return train.seq_len.value_or(training::TrainConfig::defaults(kind_of(model)).seq_len);
}

std::size_t RunConfig::stride() const {
  return train.stride.value_or(training::TrainConfig::defaults(kind_of(model)).stride);
}

training::TrainConfig RunConfig::train_config() const {
  training::TrainConfig c = training::TrainConfig::defaults(kind_of(model));
  c.seq_len = seq_len();
  c.stride = stride();
  c.max_epochs = train.max_epochs;
  c.patience = train.patience;
  c.seed = seed;
  return c;
}

training::Grid RunConfig::search_grid() const {
  return grid.apply(training::Grid::for_kind(kind_of(model)));
}

void RunConfig::validate() const {
  train_config().validate();
  if (train.n_iter == 0) throw ConfigError("train.n_iter must be at least 1");
  if (train.threads == 0) throw ConfigError("train.threads must be at least 1");
  if (cpd_threads == 0) throw ConfigError("cpd.threads must be at least 1");
  if (cpd_lbws.empty()) throw ConfigError("cpd.lbws must not be empty");
  std::set<std::size_t> seen;
  for (std::size_t l : cpd_lbws) {
    if (l < 2) throw ConfigError(fmt::format("cpd lookback {} is too short", l));
    if (!seen.insert(l).second) throw ConfigError(fmt::format("cpd lookback {} repeated", l));
  }
  if (search_grid().points(kind_of(model)).empty()) {
    throw ConfigError("search grid has no admissible point");
  }
  if (splits && splits->end <= splits->begin) throw ConfigError("splits.end must follow splits.begin");
  std::set<std::string> names;
  for (const Scenario& s : scenarios) {
    if (s.name.empty()) throw ConfigError("scenario without a name");
    if (s.name.find_first_of("/\\ ,\"") != std::string::npos) {
      throw ConfigError(fmt::format("scenario name '{}' must not contain separators", s.name));
    }
    if (!names.insert(s.name).second) throw ConfigError(fmt::format("scenario '{}' repeated", s.name));
    if (s.range.empty()) {
      throw ConfigError(fmt::format("scenario '{}' has an empty date range", s.name));
    }
  }
  synth.validate();
}

namespace {

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be an object", where));
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
  }
}

Date date_of(const json& j, std::string_view where) {
  if (!j.is_string()) throw ConfigError(fmt::format("{} must be a YYYY-MM-DD string", where));
  try {
    return marketdata::parse_date(j.get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("{}: {}", where, e.what()));
  }
}

std::filesystem::path path_of(const json& j, const std::filesystem::path& base,
                              std::string_view where) {
  if (!j.is_string()) throw ConfigError(fmt::format("{} must be a path string", where));
  std::filesystem::path p = j.get<std::string>();
  return p.is_absolute() ? p : base / p;
}

template <typename T>
T get(const json& j, std::string_view where) {
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!j.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
    }
    return j.get<T>();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", where, e.what()));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", where, e.what()));
  }
}

template <typename T>
std::vector<T> list_of(const json& j, std::string_view where) {
  if (!j.is_array()) throw ConfigError(fmt::format("{} must be a list", where));
  std::vector<T> out;
  for (const auto& v : j) out.push_back(get<T>(v, where));
  return out;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  check_keys(j, "config",
             {"out", "prices", "metadata", "features_dir", "cpd_cache", "models_dir", "seed",
              "model", "winsorise", "cpd", "splits", "scenarios", "train", "grid", "synth",
              "interpret"});
  RunConfig c;
  if (j.contains("out")) c.out = path_of(j["out"], base, "out");
  if (j.contains("prices")) c.prices = path_of(j["prices"], base, "prices");
  if (j.contains("metadata")) c.metadata = path_of(j["metadata"], base, "metadata");
  if (j.contains("features_dir")) c.features_dir = path_of(j["features_dir"], base, "features_dir");
  if (j.contains("cpd_cache")) c.cpd_cache = path_of(j["cpd_cache"], base, "cpd_cache");
  if (j.contains("models_dir")) c.models_dir = path_of(j["models_dir"], base, "models_dir");
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j["seed"], "seed");
  if (j.contains("model")) c.model = parse_model_variant(get<std::string>(j["model"], "model"));
  if (j.contains("winsorise")) c.winsorise = get<bool>(j["winsorise"], "winsorise");

  if (j.contains("cpd")) {
    const json& s = j["cpd"];
    check_keys(s, "cpd", {"lbws", "threads"});
    if (s.contains("lbws")) c.cpd_lbws = list_of<std::size_t>(s["lbws"], "cpd.lbws");
    if (s.contains("threads")) c.cpd_threads = get<std::size_t>(s["threads"], "cpd.threads");
  }
  if (j.contains("splits")) {
    const json& s = j["splits"];
    check_keys(s, "splits", {"begin", "end", "first_test_year", "step_years"});
    for (auto key : {"begin", "end", "first_test_year"}) {
      if (!s.contains(key)) throw ConfigError(fmt::format("splits.{} is required", key));
    }
    SplitSettings sp;
    sp.begin = date_of(s["begin"], "splits.begin");
    sp.end = date_of(s["end"], "splits.end");
    sp.first_test_year = get<int>(s["first_test_year"], "splits.first_test_year");
    if (s.contains("step_years")) sp.step_years = get<int>(s["step_years"], "splits.step_years");
    c.splits = sp;
  }
  if (j.contains("scenarios")) {
    if (!j["scenarios"].is_array()) throw ConfigError("scenarios must be a list");
    for (const json& s : j["scenarios"]) {
      check_keys(s, "scenario", {"name", "begin", "end"});
      for (auto key : {"name", "begin", "end"}) {
        if (!s.contains(key)) throw ConfigError(fmt::format("scenario.{} is required", key));
      }
      c.scenarios.push_back({get<std::string>(s["name"], "scenario.name"),
                             {date_of(s["begin"], "scenario.begin"), date_of(s["end"], "scenario.end")}});
    }
  }
  if (j.contains("train")) {
    const json& s = j["train"];
    check_keys(s, "train", {"seq_len", "stride", "max_epochs", "patience", "n_iter", "threads"});
    if (s.contains("seq_len")) c.train.seq_len = get<std::size_t>(s["seq_len"], "train.seq_len");
    if (s.contains("stride")) c.train.stride = get<std::size_t>(s["stride"], "train.stride");
    if (s.contains("max_epochs")) c.train.max_epochs = get<std::size_t>(s["max_epochs"], "train.max_epochs");
    if (s.contains("patience")) c.train.patience = get<std::size_t>(s["patience"], "train.patience");
    if (s.contains("n_iter")) c.train.n_iter = get<std::size_t>(s["n_iter"], "train.n_iter");
    if (s.contains("threads")) c.train.threads = get<std::size_t>(s["threads"], "train.threads");
  }
  if (j.contains("grid")) {
    const json& s = j["grid"];
    check_keys(s, "grid", {"batch_size", "learning_rate", "dropout", "max_grad_norm", "hidden", "heads"});
    if (s.contains("batch_size")) c.grid.batch_size = list_of<std::size_t>(s["batch_size"], "grid.batch_size");
    if (s.contains("learning_rate")) c.grid.learning_rate = list_of<double>(s["learning_rate"], "grid.learning_rate");
    if (s.contains("dropout")) c.grid.dropout = list_of<double>(s["dropout"], "grid.dropout");
    if (s.contains("max_grad_norm")) c.grid.max_grad_norm = list_of<double>(s["max_grad_norm"], "grid.max_grad_norm");
    if (s.contains("hidden")) c.grid.hidden = list_of<std::size_t>(s["hidden"], "grid.hidden");
    if (s.contains("heads")) c.grid.heads = list_of<std::size_t>(s["heads"], "grid.heads");
  }
  if (j.contains("synth")) {
    const json& s = j["synth"];
    check_keys(s, "synth", {"n_assets", "n_days", "regime_mean_duration", "annual_drift",
                            "annual_vol", "vol_multipliers", "initial_price", "start"});
    auto& sp = c.synth;
    if (s.contains("n_assets")) sp.n_assets = get<std::size_t>(s["n_assets"], "synth.n_assets");
    if (s.contains("n_days")) sp.n_days = get<std::size_t>(s["n_days"], "synth.n_days");
    if (s.contains("regime_mean_duration")) {
      sp.regime_mean_duration = get<double>(s["regime_mean_duration"], "synth.regime_mean_duration");
    }
    if (s.contains("annual_drift")) sp.annual_drift = get<double>(s["annual_drift"], "synth.annual_drift");
    if (s.contains("annual_vol")) {
      sp.daily_vol = get<double>(s["annual_vol"], "synth.annual_vol") / std::sqrt(252.0);
    }
    if (s.contains("vol_multipliers")) {
      sp.vol_multipliers = list_of<double>(s["vol_multipliers"], "synth.vol_multipliers");
    }
    if (s.contains("initial_price")) sp.initial_price = get<double>(s["initial_price"], "synth.initial_price");
    if (s.contains("start")) sp.start = date_of(s["start"], "synth.start");
  }
  if (j.contains("interpret")) {
    const json& s = j["interpret"];
    check_keys(s, "interpret", {"date", "split"});
    if (s.contains("date")) c.interpret_date = date_of(s["date"], "interpret.date");
    if (s.contains("split")) c.interpret_split = get<std::size_t>(s["split"], "interpret.split");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("config not found: {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

}  // namespace momtx::cli
