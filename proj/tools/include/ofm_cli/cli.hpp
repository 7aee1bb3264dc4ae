#pragma once

#include <iosfwd>

namespace ofm::cli {

/// Exit codes of the ofm tool.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,  // verification failed or an unclassified library error
  kConfigError = 2,
  kDivergence = 3,
  kIoError = 4,
};

/// Runs `ofm <subcommand> [flags]`; argv[0] is the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ofm::cli
