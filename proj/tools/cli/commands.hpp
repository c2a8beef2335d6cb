#pragma once

#include <iosfwd>

namespace rusgroup::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitTransport = 3;
inline constexpr int kExitProtocol = 4;

// Parses argv, runs one subcommand and prints a single JSON summary line to
// `out`. Error details also go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rusgroup::cli
