// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "momtx/cli/config.hpp"
#include "momtx/features/features.hpp"

namespace momtx::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

struct CpdOptions {
  bool resume = false;
};

struct FeatureOptions {
  bool with_cpd = false;
};

void cmd_synth(const RunConfig& config, std::ostream& log);
void cmd_cpd(const RunConfig& config, const CpdOptions& options, std::ostream& log);
void cmd_features(const RunConfig& config, const FeatureOptions& options, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_backtest(const RunConfig& config, std::ostream& log);
void cmd_interpret(const RunConfig& config, std::ostream& log);

/// Feature panels of a directory, ordered by file name.
std::vector<features::FeaturePanel> load_panels(const std::filesystem::path& dir);

/// Copy keeping the named columns in the given order. Throws ConfigError
/// when a column is absent.
features::FeaturePanel select_columns(const features::FeaturePanel& panel,
                                      const std::vector<std::string>& columns);

/// Entry point of the `momtx` executable; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace momtx::cli
