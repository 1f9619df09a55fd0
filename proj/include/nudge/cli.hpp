#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nudge {

/// Runs the command line tool. args[0] is the program name. Returns the
/// process exit code; diagnostics go to err as a single line.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nudge
