#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ibsrisk {

/// coef * x^power
struct PowerTerm {
  double coef = 0.0;
  double power = 0.0;
};

/// L(x) = sum of terms on [lo, hi). hi may be +inf.
struct Segment {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<PowerTerm> terms;

  double eval(double x) const;
  bool is_constant() const;
};

/// A loss L(x) of the normalized ratio x = p_hat / p.
///
/// Either piecewise-power (segments covering (0, inf), evaluated term by term
/// and integrable in closed form) or a callback with user-declared
/// breakpoints. At a breakpoint the right-hand limit is returned.
///
/// Metadata:
///   K        envelope exponent as x -> 0   (L = O(x^K))
///   K_prime  envelope exponent as x -> inf (L = O(x^K')), must be < r for
///            the risk integrals to exist; checked at use time
///   xi       L non-increasing on (0, xi)
///   xi_prime L non-decreasing on (xi', inf)
class LossSpec {
 public:
  struct Metadata {
    std::optional<double> K;
    std::optional<double> K_prime;
    std::optional<double> xi;
    std::optional<double> xi_prime;
  };

  /// Throws DomainError unless the segments are contiguous, start at 0 and
  /// end at +inf. Missing metadata is derived from the segments: K from the
  /// smallest power on the first segment, K' from the largest power on the
  /// last, xi / xi' from the outermost breakpoints.
  static LossSpec piecewise_power(std::vector<Segment> segments, Metadata meta = {});

  static LossSpec callback(std::function<double(double)> fn, std::vector<double> breakpoints,
                           double K, double K_prime, std::optional<double> xi = {},
                           std::optional<double> xi_prime = {});

  /// (x - 1)^2: normalized mean square error.
  static LossSpec mse();
  /// |x - 1|: normalized mean absolute error.
  static LossSpec mae();
  /// 0 on [1/mu2, mu1], 1 elsewhere: one minus the confidence of the
  /// relative interval [p/mu2, p mu1]. mu1, mu2 > 1.
  static LossSpec interval_confidence(double mu1, double mu2);
  /// A2 below 1/mu2, 0 on [1/mu2, mu1], A1 above mu1.
  static LossSpec generalized_interval(double A1, double A2, double mu1, double mu2);
  /// L(x) = c everywhere.
  static LossSpec constant(double c);

  double operator()(double x) const { return evaluate(x); }
  double evaluate(double x) const;
  /// lim_{t -> x-} L(t)
  double left_limit(double x) const;
  /// lim_{x -> 0+} L(x); may be +inf.
  double limit_at_zero() const;

  /// A rigorous upper bound of L on (0, x0]. Uses left-monotonicity when
  /// x0 < xi and, for piecewise-power losses, the fact that each monomial is
  /// monotone so its maximum on an interval sits at an endpoint. Returns
  /// +inf when no finite bound is available.
  double sup_bound_below(double x0) const;

  /// c * L
  LossSpec scaled(double c) const;

  bool is_piecewise_power() const noexcept { return !callback_; }
  const std::vector<Segment>& segments() const noexcept { return segments_; }
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  double K() const noexcept { return K_; }
  double K_prime() const noexcept { return K_prime_; }
  std::optional<double> xi() const noexcept { return xi_; }
  std::optional<double> xi_prime() const noexcept { return xi_prime_; }

  /// "mse", "mae", "interval", "generalized_interval", "constant",
  /// "piecewise_power" or "callback".
  const std::string& kind() const noexcept { return kind_; }
  const std::map<std::string, double>& params() const noexcept { return params_; }

 private:
  LossSpec() = default;

  std::string kind_ = "piecewise_power";
  std::map<std::string, double> params_;
  std::vector<Segment> segments_;
  std::vector<double> breakpoints_;
  std::function<double(double)> callback_;
  double K_ = 0.0;
  double K_prime_ = 0.0;
  std::optional<double> xi_;
  std::optional<double> xi_prime_;
};

/// Log-spaced evaluation grid on [lo, hi] with every breakpoint inside the
/// range added. Endpoints are exact.
std::vector<std::pair<double, double>> sample_grid(const LossSpec& loss, double lo, double hi,
                                                   int n);

/// Grid-based, advisory check of the standing assumptions on a loss.
struct LossGridReport {
  bool nonnegative = true;
  bool left_monotone = true;   // non-increasing on (0, xi)
  bool right_monotone = true;  // non-decreasing on (xi', inf)
  bool envelope_zero_bounded = true;
  bool envelope_inf_bounded = true;
  bool finite_breakpoints = true;
  std::vector<std::string> notes;

  bool ok() const {
    return nonnegative && left_monotone && right_monotone && envelope_zero_bounded &&
           envelope_inf_bounded && finite_breakpoints;
  }
};

LossGridReport check_loss_grid(const LossSpec& loss, int points = 10000);

/// Result of testing  int_xi^inf (L(xi-) - L(x)) / x^(r+1) dx > 0.
struct LeftConditionReport {
  bool holds = false;
  double value = 0.0;     // the integral at xi_used
  double abs_error = 0.0;
  double xi_used = 0.0;
  bool via_limit_condition = false;  // decided by the (A, B, s) sufficient condition
};

/// Limit description lim_{x->0} (L(x) - A) / x^s = B supplied by the caller.
struct ZeroLimitHint {
  double A = 0.0;
  double B = 0.0;
  double s = 0.0;
};

/// The left-side integral condition at a given xi, using the left limit
/// L(xi-) (the value at the single point xi does not matter for the
/// existence of a valid xi). Piecewise-power losses are integrated in
/// closed form, callbacks by adaptive quadrature.
LeftConditionReport left_condition_integral(const LossSpec& loss, int r, double xi);

/// Checks the left-side condition at the loss's xi and, if it fails there,
/// at xi / 2^k (any smaller xi inherits the monotonicity). When a hint with
/// B s < 0 and s < r is given, the sufficient limit condition decides.
LeftConditionReport check_left_condition(const LossSpec& loss, int r,
                                           std::optional<ZeroLimitHint> hint = {});

}  // namespace ibsrisk
