#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lrep::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Parses `args` (without the program name) and runs one command. Results go
/// to `out` as JSON; runtime failures go to `err` as
/// {"error": {"kind": ..., "message": ...}}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lrep::cli
