#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ibsrisk::cli {

// exit codes
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDivergence = 2;
inline constexpr int kNoOptimum = 3;
inline constexpr int kVerifyFailed = 4;

inline constexpr const char* kVersion = "0.1.0";

/// Runs the command line (without the program name). Results go to out,
/// diagnostics and error JSON to err.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

/// "0.5,0.1" or "logspace:1e-4:0.5:20". Throws DomainError.
std::vector<double> parse_p_grid(const std::string& spec);

/// "A..B". Throws DomainError.
std::pair<int, int> parse_r_range(const std::string& spec);

}  // namespace ibsrisk::cli
