#pragma once

#include <string>
#include <vector>

#include "ibsrisk/asymptotic_risk.hpp"
#include "ibsrisk/loss.hpp"

namespace ibsrisk {

struct OptimizerConfig {
  /// Stop refining once the bracket is narrower than this times omega ...
  double omega_rel_tol = 1e-9;
  /// ... and |d eta_bar / d omega| * omega is below this times eta_bar (or
  /// the derivative sign is no longer resolvable).
  double residual_rel_tol = 1e-9;
  int max_doublings = 60;
  int scan_points = 32;
  int max_bisections = 200;
  AsymptoticOptions risk;
};

struct OptimumResult {
  double omega_star = 0.0;
  double eta_star = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  int iterations = 0;
  /// d eta_bar / d omega at omega_star
  double stationarity_residual = 0.0;
  bool converged = false;
  /// more than one sign change of the derivative was found in the bracket
  bool multiplicity_warning = false;
  std::vector<double> candidates;
  /// result of the left-side integral condition (advisory)
  bool left_condition_holds = false;
  /// hypotheses the optimizer relies on but cannot verify numerically
  std::vector<std::string> unchecked_hypotheses;
};

/// Minimizes eta_bar(omega) over omega > 0 for the given loss and r.
///
/// Brackets a - to + sign change of the derivative by doubling/halving from
/// omega = r, scans the bracket on a log grid for further sign changes,
/// refines each by bisection on the derivative and returns the candidate
/// with the smallest risk. Throws NoOptimumError if no sign change is found
/// (eta_bar monotone on the search range).
OptimumResult find_optimum(const LossSpec& loss, int r, const OptimizerConfig& config = {});

}  // namespace ibsrisk
