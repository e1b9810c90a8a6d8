#pragma once

#include <string>

#include "iklflow/config.hpp"

namespace iklflow {

inline constexpr const char *kLibraryVersion = "0.1.0";

/// Executes the configured run and writes metrics.csv, manifest.json,
/// and final_ensemble.csv into out_dir (created if needed; files are
/// written to a temp name and renamed). Returns the process exit code.
int cmd_run(const std::string &config_path, const std::string &out_dir);

/// Runs the acceptance-check suite for the given scope
/// ("kernels" | "flows" | "oracles" | "all"), prints one pass/fail line
/// per criterion, and returns 0 iff all pass.
int cmd_check(const std::string &scope);

}  // namespace iklflow
