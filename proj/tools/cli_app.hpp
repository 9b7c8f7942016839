#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sbm::cli {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Runs the tool on `args` (without the program name). Messages go to `out`
/// and `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sbm::cli
