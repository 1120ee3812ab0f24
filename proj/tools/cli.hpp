#pragma once

#include <ostream>

namespace halo::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,  // replay mismatch, unexpected errors
  kUsage = 2,
  kData = 3,
  kTraining = 4,
  kBudget = 5,
};

/// Runs one command line; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace halo::cli
