#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace neurasr::cli {

/// Runs the command line. Returns the process exit code: 0 on success,
/// 1 on a runtime error, 2 on a usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace neurasr::cli
