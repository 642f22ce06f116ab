#pragma once

#include <string>
#include <vector>

#include "ecg/error.hpp"

namespace ecg::cli {

/// Process exit codes. Stable; scripts depend on them.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitInvalidInput = 2,
  kExitEmptyMask = 3,
  kExitDegenerateImage = 4,
  kExitAnalysis = 5,
  kExitNetwork = 6,
  kExitAuth = 7,
};

int exit_code_for(ErrorCode code);

/// Parses `args` (args[0] is the program name) and runs the subcommand.
int run(const std::vector<std::string>& args);

}  // namespace ecg::cli
