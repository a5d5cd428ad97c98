#pragma once
#include <iosfwd>
#include <string>
#include <vector>

namespace snapcluster::cli {

// Runs one subcommand. args excludes the program name. Returns the process
// exit code: 0 on success, 1 on failure, 2 for an unknown subcommand.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace snapcluster::cli
