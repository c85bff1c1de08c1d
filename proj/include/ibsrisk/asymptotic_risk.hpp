#pragma once

#include <map>
#include <mutex>
#include <string>
#include <utility>

#include "ibsrisk/loss.hpp"
#include "ibsrisk/quadrature.hpp"

namespace ibsrisk {

// The asymptotic risk of an estimator with lim n g(n) = omega:
//
//   eta_bar(omega) = int_0^inf phi(nu) L(omega / nu) dnu
//                  = int_0^inf psi(x, omega) L(x) dx
//
// For piecewise-power losses each term a x^b on [lo, hi) contributes
//   a omega^b (Gamma(r-b, omega/hi) - Gamma(r-b, omega/lo)) / (r-1)!
// and the sum is exact up to incomplete-gamma rounding.

enum class RiskMethod { automatic, analytic, adaptive };
enum class IntegrationVariable { x, nu };

std::string to_string(RiskMethod m);

struct QuadratureReport {
  double value = 0.0;
  double abs_error_estimate = 0.0;
  int subdivisions = 0;
  RiskMethod method = RiskMethod::analytic;
};

struct AsymptoticOptions {
  RiskMethod method = RiskMethod::automatic;  // analytic when the loss allows it
  IntegrationVariable variable = IntegrationVariable::x;
  double rel_tol = 1e-11;
  double abs_tol = 1e-13;
  int max_subdivisions = 4000;
  /// Relative mass of the kernel tail dropped beyond the nu cutoff.
  double tail_mass = 1e-14;
};

/// eta_bar for the given loss, r >= 1 and omega > 0.
/// Throws DivergenceError when a term grows like x^b with b >= r on the
/// unbounded segment (or K' >= r for a callback), ConvergenceError when the
/// adaptive integrator misses its tolerance.
QuadratureReport asymptotic_risk(const LossSpec& loss, int r, double omega,
                                 const AsymptoticOptions& opts = {});

/// d eta_bar / d omega = r (eta_bar|_r - eta_bar|_{r+1}) / omega.
double asymptotic_risk_derivative(const LossSpec& loss, int r, double omega,
                                  const AsymptoticOptions& opts = {});

/// d eta_bar / d omega by differentiating the closed-form term sum directly,
/// int dpsi/domega L(x) dx. Piecewise-power losses only. Each segment
/// boundary h contributes omega^(r-1) e^(-omega/h) h^(b-r) / (r-1)!.
double asymptotic_risk_derivative_direct(const LossSpec& loss, int r, double omega);

/// eta_bar|_r(omega) - eta_bar|_{r+1}(omega); zero at a stationary omega.
double stationarity_check(const LossSpec& loss, int r, double omega,
                          const AsymptoticOptions& opts = {});

// Closed forms for the three worked losses.

enum class ClosedFormLoss { mse, mae, generalized_interval };

struct IntervalParams {
  double A1 = 1.0;
  double A2 = 1.0;
  double mu1 = 2.0;
  double mu2 = 2.0;
};

/// omega^2 / ((r-1)(r-2)) - 2 omega / (r-1) + 1; r >= 3.
double closed_form_mse(int r, double omega);
/// 2 (Gamma(r, omega) - omega Gamma(r-1, omega)) / (r-1)! + omega / (r-1) - 1; r >= 2.
double closed_form_mae(int r, double omega);
/// A1 gamma(r, omega/mu1) / (r-1)! + A2 Gamma(r, omega mu2) / (r-1)!.
double closed_form_generalized_interval(int r, double omega, const IntervalParams& p);
/// omega^(r-1) (A1 mu1^-r e^(-omega/mu1) - A2 mu2^r e^(-omega mu2)) / (r-1)!.
double closed_form_generalized_interval_derivative(int r, double omega, const IntervalParams& p);
/// Stationary point of the generalized-interval risk,
///   (r log(mu1 mu2) - log(A1/A2)) / (mu2 - 1/mu1);
/// positive only when A1/A2 < (mu1 mu2)^r.
double generalized_interval_optimum(int r, const IntervalParams& p);

double closed_form_risk(ClosedFormLoss tag, int r, double omega, const IntervalParams& p = {});

/// Memoizing evaluator bound to one loss. Omega is rounded to 12 significant
/// digits and the risk is evaluated at the rounded value, so results depend
/// only on the key and are bitwise reproducible regardless of call order.
/// Safe for concurrent use.
class RiskEvaluator {
 public:
  explicit RiskEvaluator(LossSpec loss, AsymptoticOptions opts = {});

  QuadratureReport risk(int r, double omega) const;
  double derivative(int r, double omega) const;

  /// Derivative together with a bound on its rounding/quadrature noise.
  struct Slope {
    double value;
    double noise;
    int sign() const { return value > noise ? 1 : (value < -noise ? -1 : 0); }
  };
  Slope slope(int r, double omega) const;

  const LossSpec& loss() const noexcept { return loss_; }
  const AsymptoticOptions& options() const noexcept { return opts_; }
  std::size_t cache_size() const;

  static double round_key(double omega);

 private:
  LossSpec loss_;
  AsymptoticOptions opts_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<int, double>, QuadratureReport> cache_;
};

}  // namespace ibsrisk
