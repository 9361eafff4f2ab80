#pragma once

#include <iosfwd>

namespace mtot {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3 };

/// Entry point of the `mtot` tool. Subcommands: simulate, fit, predict, cv, benchmark.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mtot
