#pragma once

// Command-line front end: fit / predict / simulate / simstudy / diagnose.

#include <iosfwd>
#include <string>
#include <vector>

namespace bcam {

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitNumerical = 2, kExitNotConverged = 3 };

/// Runs one command; argv[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bcam
