#pragma once

#include <cstdint>

namespace ibsrisk {

// Incomplete gamma functions, not normalized:
//   Gamma(s, u) = int_u^inf t^(s-1) e^-t dt
//   gamma(s, u) = int_0^u  t^(s-1) e^-t dt = Gamma(s) - Gamma(s, u)
//
// upper_inc_gamma accepts any real order s (s <= 0 included), which is what
// piecewise-power losses with arbitrary exponents need. Relative accuracy is
// about 1e-13 or better on s in [-20, 50], u in [1e-8, 700].

/// log Gamma(s, u) for real s and u > 0. Never overflows.
double log_upper_inc_gamma(double s, double u);

/// Gamma(s, u). Throws RangeError if the value is not a finite normal double;
/// use log_upper_inc_gamma in that case.
double upper_inc_gamma(double s, double u);

/// gamma(s, u) for s > 0, u > 0.
double lower_inc_gamma(double s, double u);

/// Regularized Q(s, u) = Gamma(s, u) / Gamma(s), s > 0.
double gamma_q(double s, double u);

/// Regularized P(s, u) = gamma(s, u) / Gamma(s), s > 0.
double gamma_p(double s, double u);

/// int_lo^hi t^(s-1) e^-t dt with 0 <= lo <= hi <= inf. lo == 0 needs s > 0,
/// hi == inf is always finite. Picks the cancellation-free route.
double inc_gamma_between(double s, double lo, double hi);

/// log n!
double log_factorial(int n);

/// The kernels of the inverse binomial sampling risk for a fixed number of
/// required successes r.
///
/// phi(nu) is the gamma(r, 1) density, the p -> 0 limit of the scaled
/// negative binomial pmf. psi(x, omega) is the same density after the change
/// of variable nu = omega / x, so that
///   psi(omega / nu, omega) * omega / nu^2 == phi(nu).
class Kernel {
 public:
  /// Throws DomainError if r < 1.
  explicit Kernel(int r);

  int r() const noexcept { return r_; }

  /// nu^(r-1) e^-nu / (r-1)!, nu > 0.
  double phi(double nu) const;
  double log_phi(double nu) const;

  /// omega^r e^(-omega/x) / (x^(r+1) (r-1)!), x > 0, omega > 0.
  double psi(double x, double omega) const;

  /// P[N = n] for the number of trials N needed to observe r successes with
  /// success probability p. Computed in log space.
  double neg_binomial_pmf(double p, std::int64_t n) const;
  double log_neg_binomial_pmf(double p, std::int64_t n) const;

  /// P[N > n] = P[fewer than r successes in n trials], summed exactly as a
  /// finite binomial sum (equivalently 1 - I_p(r, n - r + 1)).
  double neg_binomial_tail(double p, std::int64_t n) const;

  struct FiniteKernel {
    double value;
    bool nonpositive;  // nu <= (r-1) p makes a product factor <= 0
  };

  /// (1-p)^(nu/p - r) / (r-1)! * prod_{i=1}^{r-1} (nu - i p).
  /// Satisfies p * phi_finite_p(p, n p) == pmf(n) and tends to phi(nu) as
  /// p -> 0.
  FiniteKernel phi_finite_p(double p, double nu) const;

 private:
  int r_;
  double log_norm_;  // log (r-1)!
};

}  // namespace ibsrisk
