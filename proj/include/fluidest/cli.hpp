#pragma once

#include <ostream>

namespace fluidest::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

/// Entry point of the fluidest command line. Subcommands: simulate, gen-images, estimate,
/// train-corrector, eval, report. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fluidest::cli
