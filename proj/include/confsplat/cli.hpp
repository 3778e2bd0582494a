#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace confsplat::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kDivergence = 3 };

/// Parses `start:stop:step` (both ends inclusive within 1e-9) or a single value.
/// Throws std::invalid_argument on malformed input or values outside [0, 1].
std::vector<double> parse_tau_range(const std::string& text);

/// Runs one subcommand. argv[0] is the program name.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace confsplat::cli
