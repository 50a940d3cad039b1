#pragma once

#include "floodlens/error.hpp"

#include <string>
#include <vector>

namespace floodlens::cli {

/// Process exit status for a fatal library error.
int exit_code(ErrorCode code) noexcept;

inline constexpr int kUsageExit = 2;

/// Runs the command line `args` (args[0] is the program name). Diagnostics go to stderr.
int run(const std::vector<std::string>& args);

}  // namespace floodlens::cli
