#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace da3d::cli {

// Exit codes: 0 success, 2 config or usage error, 3 numerical divergence,
// 4 data or shape error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitData = 4;

// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace da3d::cli
