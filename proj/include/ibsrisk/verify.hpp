#pragma once

#include <string>
#include <vector>

namespace ibsrisk {

/// One checked quantity of a verification suite.
struct SuiteRow {
  std::string label;
  double value = 0.0;
  double limit = 0.0;   // threshold the value is compared against
  double margin = 0.0;  // positive when passing
  bool pass = false;
};

struct SuiteReport {
  std::string suite;
  std::vector<SuiteRow> rows;
  std::vector<std::string> notes;
  bool pass = true;
};

/// Suite names accepted by run_suites.
const std::vector<std::string>& suite_names();

/// Runs "mse-minimax", "mae-stationarity", "interval-guarantee",
/// "convergence", "special-functions" or "all". r_lo/r_hi narrow the r range
/// of every suite (each suite clips it to its own valid range); pass 0 for
/// the suite defaults. Throws DomainError for an unknown name.
std::vector<SuiteReport> run_suites(const std::string& name, int r_lo = 0, int r_hi = 0);

}  // namespace ibsrisk
