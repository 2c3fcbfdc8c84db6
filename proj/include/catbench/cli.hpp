#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace catbench {

inline constexpr const char* kToolName = "catbench";
inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes shared by every subcommand.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitData = 3,
    kExitExternal = 4,
    kExitNumerical = 5,
};

/// Runs one subcommand (ingest, warm-cache, train, predict, evaluate, bench, cost).
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace catbench
