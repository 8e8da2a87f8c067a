#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace gluscope::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Worker threads for `requested` shards, capped by GLUSCOPE_THREADS and the
// hardware concurrency.
std::size_t worker_count(std::size_t requested);

} // namespace gluscope::cli
