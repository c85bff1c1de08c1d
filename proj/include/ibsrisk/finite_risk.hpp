#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ibsrisk/asymptotic_risk.hpp"
#include "ibsrisk/loss.hpp"

namespace ibsrisk {

/// Non-randomized estimator p_hat = g(N).
///
/// shifted_reciprocal: g(n) = omega / (n + c). (r-1)/(N-1) is omega = r-1,
/// c = -1; (r-2)/(N-1) is omega = r-2, c = -1; omega/(N+1) is c = +1.
/// table: explicit g(first_n), g(first_n + 1), ... followed by the
/// reciprocal tail omega / (n + c). Either way lim n g(n) = omega.
class Estimator {
 public:
  static Estimator shifted_reciprocal(double omega, int c);
  static Estimator table(std::int64_t first_n, std::vector<double> values, double omega, int c);

  /// g(n). Throws DomainError if g(n) would be non-positive.
  double operator()(std::int64_t n) const;

  double omega() const noexcept { return omega_; }
  int c() const noexcept { return c_; }
  bool is_table() const noexcept { return !values_.empty(); }
  std::int64_t first_n() const noexcept { return first_n_; }
  const std::vector<double>& values() const noexcept { return values_; }
  /// first n from which g is the non-increasing reciprocal tail
  std::int64_t tail_start() const noexcept {
    return first_n_ + static_cast<std::int64_t>(values_.size());
  }

  /// Throws DomainError unless g(n) > 0 for all n >= r (c >= 1 - r) and,
  /// for tables, first_n == r.
  void validate_for(int r) const;

  std::string describe() const;

 private:
  Estimator() = default;
  double omega_ = 1.0;
  int c_ = 0;
  std::int64_t first_n_ = 0;
  std::vector<double> values_;
};

/// Envelope L(x) <= M x^K for x < x_limit, used to certify the series tail
/// when L(0+) is infinite.
struct LossEnvelope {
  double M = 1.0;
  double K = 0.0;
  double x_limit = 0.0;
};

struct ExactRiskOptions {
  /// stop once the certified remainder is <= tol
  double tol = 1e-12;
  std::int64_t max_terms = 100'000'000;
  std::optional<LossEnvelope> envelope;
};

struct ExactRiskResult {
  double eta = 0.0;
  /// certified bound on the discarded tail of the series
  double truncation_bound = 0.0;
  /// allowance for floating-point error in the partial sum itself
  double rounding_bound = 0.0;
  std::int64_t terms = 0;
  /// false when the term cap was hit before the bound reached tol
  bool converged = false;
};

/// eta(p) = sum_{n>=r} f(n) L(g(n)/p), summed until
/// P[N > n] * sup{L(x) : x <= g(n+1)/p} <= tol. The tail probability is the
/// exact finite binomial sum, not an estimate.
ExactRiskResult exact_risk(const LossSpec& loss, const Estimator& est, int r, double p,
                           const ExactRiskOptions& opts = {});

struct SimConfig {
  std::uint64_t samples = 100000;
  std::uint64_t seed = 1;
  std::uint64_t batch = 65536;
  unsigned threads = 1;
};

struct SimulationResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::uint64_t samples = 0;
};

/// One draw of N: r geometric trial counts by inverse CDF,
/// floor(log U / log(1 - p)) + 1 each.
template <class Rng>
std::int64_t draw_trials(Rng& rng, int r, double p) {
  const double log_q = std::log1p(-p);
  std::int64_t n = 0;
  for (int i = 0; i < r; ++i) {
    // 53 random bits, offset by half a step so U is never 0 or 1
    const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
    n += static_cast<std::int64_t>(std::floor(std::log(u) / log_q)) + 1;
  }
  return n;
}

/// Monte Carlo mean and standard error of statistic(N). Each batch has its
/// own generator seeded from (seed, batch index); batch partials are merged
/// in index order, so the result is bitwise independent of threading.
SimulationResult simulate_statistic(int r, double p, const SimConfig& cfg,
                                    const std::function<double(std::int64_t)>& statistic);

/// Monte Carlo estimate of eta(p).
SimulationResult simulate_risk(const LossSpec& loss, const Estimator& est, int r, double p,
                               const SimConfig& cfg);

enum class BoundKind { exact_truncation, monte_carlo_stderr, asymptotic, error };
std::string to_string(BoundKind k);

struct RiskRecord {
  double p = 0.0;
  double eta = 0.0;
  BoundKind kind = BoundKind::exact_truncation;
  double error_bound = 0.0;
  std::string message;  // set when kind == error
};

/// Records sorted by p descending; the last one (p = 0) carries eta_bar.
struct RiskCurve {
  std::vector<RiskRecord> records;
  bool any_failed() const;
};

RiskCurve risk_sweep(const LossSpec& loss, const Estimator& est, int r,
                     std::vector<double> p_grid, const ExactRiskOptions& opts = {});

RiskCurve simulate_sweep(const LossSpec& loss, const Estimator& est, int r,
                         std::vector<double> p_grid, const SimConfig& cfg);

// Verification of the global guarantees.

struct MinimaxRow {
  int r = 0;
  double p = 0.0;
  double value = 0.0;
  double bound = 0.0;
  double threshold = 0.0;  // 1 / (r - 1)
  double margin = 0.0;     // threshold - (value + bound)
  bool pass = false;
};

struct MinimaxReport {
  std::vector<MinimaxRow> rows;
  bool all_pass = true;
};

/// Normalized MSE of p_hat = (r-2)/(N-1) plus its truncation bound must lie
/// strictly below 1/(r-1) at each p. Throws DomainError if any r < 3.
MinimaxReport verify_minimax_mse(const std::vector<int>& r_list, const std::vector<double>& p_grid);

struct GuaranteeRow {
  double p = 0.0;
  double eta = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct GuaranteeReport {
  bool hypotheses_hold = false;
  std::string skip_reason;
  double upsilon = 0.0;
  double upsilon_prime = 0.0;
  double eta_bar = 0.0;
  std::vector<GuaranteeRow> rows;
  bool all_pass = false;
};

/// For p_hat = omega/(N+1): if L is constant on [upsilon, upsilon'] with
/// upsilon <= omega/(r + sqrt(r) + 1), upsilon' >= omega/(r - sqrt(r)), and
/// L is non-increasing to the left and non-decreasing to the right, checks
/// eta(p) <= eta_bar + truncation bound at every p. A violated hypothesis
/// sets skip_reason and runs nothing. r >= 3.
GuaranteeReport verify_flat_window_guarantee(const LossSpec& loss, int r, double omega,
                                    const std::vector<double>& p_grid);

}  // namespace ibsrisk
