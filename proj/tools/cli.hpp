#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crysflow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Parses `args` (without the program name), runs the subcommand and returns
/// the exit code. Domain errors go to `err` with their code name.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace crysflow::cli
