#pragma once

#include <iosfwd>

namespace hgx::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kData = 3,
  kVerifyFailed = 4,
};

/// Parses argv, dispatches to a subcommand and maps exceptions to exit codes.
/// Diagnostics go to `err` as one line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hgx::cli
