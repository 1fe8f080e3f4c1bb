#pragma once

#include <iosfwd>

namespace hemlets::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kNumericalFailure = 3,
  kIoFailure = 4,
};

/// Runs one `hemlets <subcommand> ...` invocation. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hemlets::cli
