#pragma once

// Dispatch of one configured run: executes the subcommand, writes its
// artifacts under output_dir/run_id/ and always finishes with manifest.json.

#include <string>
#include <vector>

#include "turboshape/config.hpp"

namespace turboshape {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitCheckFailed = 3 };

struct RunResult {
  int exit_code = kExitOk;
  std::string run_dir;
  /// Output files relative to run_dir, in the order they were written.
  std::vector<std::string> outputs;
  /// Single-line JSON describing the failure; empty on success.
  std::string error_line;
};

RunResult run(const RunConfig& cfg, bool verbose = false);

/// Manifest and error line for a run whose configuration could not be parsed.
RunResult report_config_failure(const std::string& output_dir, const std::string& run_id,
                                const std::string& subcommand, const std::string& config_path,
                                const std::vector<std::string>& errors);

}  // namespace turboshape
