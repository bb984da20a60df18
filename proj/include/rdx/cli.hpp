#pragma once

#include <iosfwd>

namespace rdx::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitEmpty = 3;
inline constexpr int kExitInsufficient = 4;

/// Entry point for the rdx binary. Subcommands: simulate, bounds, sweep, falsify.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rdx::cli
