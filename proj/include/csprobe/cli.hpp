#pragma once

#include <ostream>

namespace csprobe {

/// Exit codes of the cs-probe command line.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitInternal = 4,
};

/// Entry point of `cs-probe cloze-eval|confidence-eval|report`. Errors are
/// reported on `err` as one JSON line {"error": {...}}.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace csprobe
