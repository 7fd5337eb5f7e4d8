#pragma once

#include <ostream>

namespace planefilter::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitImage = 4;

/// Entry point of the `planefilter` command (filter, refine, eval, synth).
/// Diagnostics go to `err`; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace planefilter::cli
