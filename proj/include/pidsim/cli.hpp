#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pidsim::cli {

inline constexpr const char* kVersion = "1.0.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;

/// Entry point behind the `pid-sim` binary. `args[0]` is the program name.
/// Commands: run, metrics, validate. Step mode reads one line from `in`
/// per phase.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in);

}  // namespace pidsim::cli
