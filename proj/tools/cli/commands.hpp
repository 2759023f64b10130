#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace lwr::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kConfigError = 2 };

struct CommandContext {
  ExperimentConfig config;
  std::filesystem::path out_dir;
  std::ostream* log = nullptr;  // progress and warnings
};

int cmd_simulate(const CommandContext& ctx);
int cmd_expected(const CommandContext& ctx);

// Test hook: perturb B_t(0,0) by `perturb_b` at `perturb_time`.
int cmd_verify(const CommandContext& ctx, const SuiteHooks& hooks = {});

int cmd_counterexample(const CommandContext& ctx);

// Reads expected_norms.csv or summary.csv (per analysis.fit_source) from
// `input_dir`.
int cmd_ratefit(const CommandContext& ctx, const std::filesystem::path& input_dir);

// Entry point shared by the executable and the tests.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lwr::cli
