#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pqfl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Entry point for the `pqfl` tool: keygen, run, bench, report. Normal output
// goes to `out`, usage errors to `err`, logs to stderr.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pqfl::cli
