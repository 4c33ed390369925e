#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nbsearch {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitEmptyStore = 2;

/// Entry point of the nbsearch command line. args excludes the program name.
/// Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in);

}  // namespace nbsearch
