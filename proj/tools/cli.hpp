#pragma once

#include <string>
#include <vector>

namespace hdrgs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Runs the command line `args` (without the program name). Returns the
/// process exit code; messages go to stdout/stderr.
int run(const std::vector<std::string>& args);

}  // namespace hdrgs::cli
