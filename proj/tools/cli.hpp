#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace perturbeval::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitUsage = 2,
    kExitBackend = 3,
};

/// Parses `args` (args[0] is the program name), runs one subcommand and
/// returns its exit status. Failures print a single JSON object on `err`:
/// {"error": {"kind": ..., "message": ...}, "exit": <status>}.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_command(int argc, const char* const* argv);

}  // namespace perturbeval::cli
