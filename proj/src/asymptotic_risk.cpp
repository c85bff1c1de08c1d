#include "ibsrisk/asymptotic_risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ibsrisk/error.hpp"
#include "ibsrisk/special_functions.hpp"

namespace ibsrisk {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kInf = std::numeric_limits<double>::infinity();

void validate(int r, double omega) {
  if (r < 1) throw DomainError("asymptotic risk: r must be >= 1");
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw DomainError("asymptotic risk: omega must be finite and > 0");
  }
}

void check_tail_growth(const LossSpec& loss, int r) {
  if (loss.is_piecewise_power()) {
    for (const auto& t : loss.segments().back().terms) {
      if (t.coef != 0.0 && t.power >= r) {
        throw DivergenceError("asymptotic risk diverges: term x^" + std::to_string(t.power) +
                              " on the unbounded segment needs power < r = " + std::to_string(r));
      }
    }
  } else if (loss.K_prime() >= r) {
    throw DivergenceError("asymptotic risk diverges: K' = " + std::to_string(loss.K_prime()) +
                          " >= r = " + std::to_string(r));
  }
}

QuadratureReport analytic_risk(const LossSpec& loss, int r, double omega) {
  check_tail_growth(loss, r);
  const double log_norm = std::lgamma(static_cast<double>(r));
  const double log_omega = std::log(omega);
  double sum = 0.0;
  double abs_sum = 0.0;
  int terms = 0;
  for (const auto& seg : loss.segments()) {
    const double u_lo = std::isinf(seg.hi) ? 0.0 : omega / seg.hi;
    const double u_hi = seg.lo == 0.0 ? kInf : omega / seg.lo;
    for (const auto& t : seg.terms) {
      if (t.coef == 0.0) continue;
      const double d = inc_gamma_between(r - t.power, u_lo, u_hi);
      if (d > 0.0) {
        const double c = t.coef * std::exp(t.power * log_omega + std::log(d) - log_norm);
        sum += c;
        abs_sum += std::fabs(c);
      }
      ++terms;
    }
  }
  QuadratureReport rep;
  rep.value = sum;
  rep.abs_error_estimate = (1e-13 + 8.0 * kEps * std::max(terms, 1)) * abs_sum;
  rep.subdivisions = 0;
  rep.method = RiskMethod::analytic;
  return rep;
}

// nu beyond which the kernel (weighted by the envelope x^K) holds less than
// `mass` of its total: Q(max(r - K, 1), nu_cut) <= mass.
double kernel_cutoff(int r, double K, double mass) {
  const double s = std::max(r - K, 1.0);
  double hi = s + 1.0;
  while (gamma_q(s, hi) > mass) hi *= 2.0;
  double lo = 0.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (gamma_q(s, mid) > mass) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

QuadratureReport adaptive_risk(const LossSpec& loss, int r, double omega,
                               const AsymptoticOptions& opts) {
  check_tail_growth(loss, r);
  const Kernel kernel(r);
  const double nu_cut = kernel_cutoff(r, loss.K(), opts.tail_mass);
  const double mode_nu = r > 1 ? r - 1.0 : 1.0;

  auto in_nu = [&](double nu) { return kernel.phi(nu) * loss(omega / nu); };
  auto in_x = [&](double x) { return kernel.psi(x, omega) * loss(x); };

  struct Piece {
    double a, b;
    bool nu;
  };
  std::vector<Piece> pieces;

  if (opts.variable == IntegrationVariable::x) {
    std::vector<double> pts(loss.breakpoints());
    pts.push_back(omega / mode_nu);
    pts.push_back(omega / (r + 1.0));
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    // x in (0, x_1): substitute nu = omega / x, truncate at nu_cut
    if (omega / pts.front() < nu_cut) pieces.push_back({omega / pts.front(), nu_cut, true});
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) pieces.push_back({pts[i], pts[i + 1], false});
    // x in (x_D, inf): nu in (0, omega / x_D)
    pieces.push_back({0.0, omega / pts.back(), true});
  } else {
    std::vector<double> nus;
    for (double b : loss.breakpoints()) nus.push_back(omega / b);
    nus.push_back(mode_nu);
    std::sort(nus.begin(), nus.end());
    nus.erase(std::unique(nus.begin(), nus.end()), nus.end());
    pieces.push_back({0.0, std::min(nus.front(), nu_cut), true});
    for (std::size_t i = 0; i + 1 < nus.size(); ++i) {
      if (nus[i] >= nu_cut) break;
      pieces.push_back({nus[i], std::min(nus[i + 1], nu_cut), true});
    }
    if (nus.back() < nu_cut) pieces.push_back({nus.back(), nu_cut, true});
  }

  QuadratureOptions q;
  q.abs_tol = opts.abs_tol / static_cast<double>(pieces.size());
  q.rel_tol = opts.rel_tol;
  q.max_subdivisions = opts.max_subdivisions;

  QuadratureReport rep;
  rep.method = RiskMethod::adaptive;
  bool converged = true;
  for (const auto& p : pieces) {
    if (!(p.b > p.a)) continue;
    const auto res = p.nu ? integrate(in_nu, p.a, p.b, q) : integrate(in_x, p.a, p.b, q);
    rep.value += res.value;
    rep.abs_error_estimate += res.abs_error;
    rep.subdivisions += res.subdivisions;
    converged = converged && res.converged;
  }
  rep.abs_error_estimate += opts.tail_mass * std::fabs(rep.value);
  if (!converged) {
    throw ConvergenceError("asymptotic risk quadrature did not reach tolerance; partial value " +
                               std::to_string(rep.value),
                           rep.abs_error_estimate);
  }
  return rep;
}

}  // namespace

std::string to_string(RiskMethod m) {
  switch (m) {
    case RiskMethod::automatic: return "automatic";
    case RiskMethod::analytic: return "analytic";
    case RiskMethod::adaptive: return "adaptive";
  }
  return "unknown";
}

QuadratureReport asymptotic_risk(const LossSpec& loss, int r, double omega,
                                 const AsymptoticOptions& opts) {
  validate(r, omega);
  RiskMethod method = opts.method;
  if (method == RiskMethod::automatic) {
    method = loss.is_piecewise_power() ? RiskMethod::analytic : RiskMethod::adaptive;
  }
  if (method == RiskMethod::analytic) {
    if (!loss.is_piecewise_power()) {
      throw DomainError("asymptotic risk: callback losses have no analytic path");
    }
    return analytic_risk(loss, r, omega);
  }
  return adaptive_risk(loss, r, omega, opts);
}

double asymptotic_risk_derivative(const LossSpec& loss, int r, double omega,
                                  const AsymptoticOptions& opts) {
  const double here = asymptotic_risk(loss, r, omega, opts).value;
  const double next = asymptotic_risk(loss, r + 1, omega, opts).value;
  return r * (here - next) / omega;
}

double asymptotic_risk_derivative_direct(const LossSpec& loss, int r, double omega) {
  validate(r, omega);
  if (!loss.is_piecewise_power()) {
    throw DomainError("direct derivative: piecewise-power losses only");
  }
  check_tail_growth(loss, r);
  const double log_norm = std::lgamma(static_cast<double>(r));
  const double log_omega = std::log(omega);
  auto boundary = [&](double h, double b) {
    return std::exp((r - 1) * log_omega + (b - r) * std::log(h) - omega / h - log_norm);
  };
  double sum = 0.0;
  for (const auto& seg : loss.segments()) {
    const double u_lo = std::isinf(seg.hi) ? 0.0 : omega / seg.hi;
    const double u_hi = seg.lo == 0.0 ? kInf : omega / seg.lo;
    for (const auto& t : seg.terms) {
      if (t.coef == 0.0) continue;
      double d = 0.0;
      if (t.power != 0.0) {
        const double g = inc_gamma_between(r - t.power, u_lo, u_hi);
        if (g > 0.0) {
          d += t.power * std::exp((t.power - 1.0) * log_omega + std::log(g) - log_norm);
        }
      }
      if (seg.lo > 0.0) d += boundary(seg.lo, t.power);
      if (!std::isinf(seg.hi)) d -= boundary(seg.hi, t.power);
      sum += t.coef * d;
    }
  }
  return sum;
}

double stationarity_check(const LossSpec& loss, int r, double omega,
                          const AsymptoticOptions& opts) {
  return asymptotic_risk(loss, r, omega, opts).value -
         asymptotic_risk(loss, r + 1, omega, opts).value;
}

double closed_form_mse(int r, double omega) {
  if (r < 3) throw DivergenceError("MSE asymptotic risk is infinite for r < 3");
  validate(r, omega);
  return omega * omega / ((r - 1.0) * (r - 2.0)) - 2.0 * omega / (r - 1.0) + 1.0;
}

double closed_form_mae(int r, double omega) {
  if (r < 2) throw DivergenceError("MAE asymptotic risk is infinite for r < 2");
  validate(r, omega);
  const double log_norm = std::lgamma(static_cast<double>(r));
  const double g_r = std::exp(log_upper_inc_gamma(r, omega) - log_norm);
  const double g_rm1 = std::exp(log_upper_inc_gamma(r - 1.0, omega) - log_norm);
  return 2.0 * (g_r - omega * g_rm1) + omega / (r - 1.0) - 1.0;
}

double closed_form_generalized_interval(int r, double omega, const IntervalParams& p) {
  validate(r, omega);
  return p.A1 * gamma_p(r, omega / p.mu1) + p.A2 * gamma_q(r, omega * p.mu2);
}

double closed_form_generalized_interval_derivative(int r, double omega, const IntervalParams& p) {
  validate(r, omega);
  const double log_norm = std::lgamma(static_cast<double>(r));
  const double lo = (r - 1) * std::log(omega) - log_norm;
  return p.A1 * std::exp(lo - r * std::log(p.mu1) - omega / p.mu1) -
         p.A2 * std::exp(lo + r * std::log(p.mu2) - omega * p.mu2);
}

double generalized_interval_optimum(int r, const IntervalParams& p) {
  return (r * std::log(p.mu1 * p.mu2) - std::log(p.A1 / p.A2)) / (p.mu2 - 1.0 / p.mu1);
}

double closed_form_risk(ClosedFormLoss tag, int r, double omega, const IntervalParams& p) {
  switch (tag) {
    case ClosedFormLoss::mse: return closed_form_mse(r, omega);
    case ClosedFormLoss::mae: return closed_form_mae(r, omega);
    case ClosedFormLoss::generalized_interval:
      return closed_form_generalized_interval(r, omega, p);
  }
  throw DomainError("closed_form_risk: unknown loss");
}

RiskEvaluator::RiskEvaluator(LossSpec loss, AsymptoticOptions opts)
    : loss_(std::move(loss)), opts_(opts) {}

double RiskEvaluator::round_key(double omega) {
  if (!(omega > 0.0) || !std::isfinite(omega)) return omega;
  const int e = static_cast<int>(std::floor(std::log10(omega)));
  const double scale = std::pow(10.0, 11 - e);
  const double k = std::round(omega * scale) / scale;
  return k > 0.0 ? k : omega;
}

QuadratureReport RiskEvaluator::risk(int r, double omega) const {
  const auto key = std::make_pair(r, round_key(omega));
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  auto rep = asymptotic_risk(loss_, r, key.second, opts_);
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(key, rep).first->second;
}

RiskEvaluator::Slope RiskEvaluator::slope(int r, double omega) const {
  const double w = round_key(omega);
  const auto here = risk(r, w);
  const auto next = risk(r + 1, w);
  const double noise =
      r *
      (here.abs_error_estimate + next.abs_error_estimate +
       4.0 * kEps * (std::fabs(here.value) + std::fabs(next.value))) /
      w;
  return {r * (here.value - next.value) / w, noise};
}

double RiskEvaluator::derivative(int r, double omega) const { return slope(r, omega).value; }

std::size_t RiskEvaluator::cache_size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.size();
}

}  // namespace ibsrisk
