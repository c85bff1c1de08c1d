#include "ibsrisk/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ibsrisk/error.hpp"

namespace ibsrisk {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;
constexpr double kEulerGamma = 0.57721566490153286060651209008240243;
constexpr int kMaxIter = 100000;

void require_positive_u(double u, const char* who) {
  if (!(u > 0.0) || std::isnan(u)) {
    throw DomainError(std::string(who) + ": u must be > 0, got " + std::to_string(u));
  }
}

// zeta(k) - 1 for k = 2, 3, ..., 41
constexpr double kZetaMinusOne[] = {
    6.44934066848226406e-01, 2.02056903159594292e-01, 8.23232337111381857e-02,
    3.69277551433699266e-02, 1.73430619844491402e-02, 8.34927738192282713e-03,
    4.07735619794433960e-03, 2.00839282608221426e-03, 9.94575127818085256e-04,
    4.94188604119464529e-04, 2.46086553308048320e-04, 1.22713347578489145e-04,
    6.12481350587048277e-05, 3.05882363070204933e-05, 1.52822594086518710e-05,
    7.63719763789976257e-06, 3.81729326499984022e-06, 1.90821271655393897e-06,
    9.53962033872796212e-07, 4.76932986787806447e-07, 2.38450502727733004e-07,
    1.19219925965311064e-07, 5.96081890512594801e-08, 2.98035035146522793e-08,
    1.49015548283650427e-08, 7.45071178983543006e-09, 3.72533402478845728e-09,
    1.86265972351304914e-09, 9.31327432419668166e-10, 4.65662906503378366e-10,
    2.32831183367650534e-10, 1.16415501727005193e-10, 5.82077208790270145e-11,
    2.91038504449710001e-11, 1.45519218910419849e-11, 7.27595983505748180e-12,
    3.63797954737865086e-12, 1.81898965030706607e-12, 9.09494784026388841e-13,
    4.54747378304215422e-13,
};

// log Gamma(1 + x) for |x| <= 1/2 with full relative accuracy near x = 0:
//   log Gamma(1 + x) = -log(1 + x) + x (1 - euler) + sum_{k>=2} (-x)^k (zeta(k) - 1) / k
double lgamma1p(double x) {
  double sum = 0.0;
  double xk = -x;
  for (int k = 2; k < 42; ++k) {
    xk *= -x;
    const double t = xk * kZetaMinusOne[k - 2] / k;
    sum += t;
    if (std::fabs(t) < kEps * 0.25 * std::fabs(sum)) break;
  }
  return -std::log1p(x) + x * (1.0 - kEulerGamma) + sum;
}

// log gamma(s, u) by the power series, s > 0. Efficient for u < s + 1.
double log_lower_series(double s, double u) {
  double ap = s;
  double del = 1.0 / s;
  double sum = del;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    del *= u / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps * 0.5) {
      return -u + s * std::log(u) + std::log(sum);
    }
  }
  throw ConvergenceError("lower incomplete gamma series did not converge", std::fabs(del));
}

// log Gamma(s, u) by the Legendre continued fraction (modified Lentz).
// Valid for any real s when u > 0; fast once u > max(1, s + 1).
double log_upper_cf(double s, double u) {
  double b = u + 1.0 - s;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) {
      return -u + s * std::log(u) + std::log(h);
    }
  }
  throw ConvergenceError("upper incomplete gamma continued fraction did not converge", 0.0);
}

// Gamma(s0, u) for s0 in (-1, 1), u small, written so that nothing cancels
// catastrophically as s0 -> 0:
//   Gamma(s0, u) = (Gamma(1 + s0) - u^s0) / s0 - sum_{n>=1} (-u)^n u^s0 / (n! (s0 + n))
// with the s0 = 0 limit -euler - log u (i.e. E1(u)).
double upper_small_u(double s0, double u) {
  const double lu = std::log(u);
  const double b = s0 * lu;
  double head;
  if (s0 == 0.0) {
    head = -kEulerGamma - lu;
  } else {
    head = std::exp(b) * std::expm1(lgamma1p(s0) - b) / s0;
  }
  double term = 1.0;
  double sum = 0.0;
  for (int n = 1; n < kMaxIter; ++n) {
    term *= -u / n;
    const double t = term / (s0 + n);
    sum += t;
    if (std::fabs(t) < kEps * 0.25 * std::fabs(sum)) break;
  }
  return head - std::exp(b) * sum;
}

// log Gamma(s, u) for s <= 1/2 and u <= 3/2: evaluate at s0 = s + k in
// (-1/2, 1/2], then recur downward on the scaled quantity
// S(t) = Gamma(t, u) / (u^t e^-u), which obeys S(t - 1) = (u S(t) - 1) / (t - 1).
// Downward recurrence is stable here because u S(t) < 1 for t < 1.
double log_upper_recurrence(double s, double u) {
  const int k = std::max(0, static_cast<int>(std::ceil(-s - 0.5)));
  const double s0 = s + k;
  const double lu = std::log(u);
  double scaled = upper_small_u(s0, u) * std::exp(u - s0 * lu);
  double t = s0;
  for (int i = 0; i < k; ++i) {
    scaled = (u * scaled - 1.0) / (t - 1.0);
    t -= 1.0;
  }
  return std::log(scaled) + s * lu - u;
}

}  // namespace

double log_upper_inc_gamma(double s, double u) {
  require_positive_u(u, "upper_inc_gamma");
  if (!std::isfinite(s)) throw DomainError("upper_inc_gamma: order must be finite");
  if (std::isinf(u)) return -std::numeric_limits<double>::infinity();
  if (u > 1.0 && u > s + 1.0) return log_upper_cf(s, u);
  if (s > 0.5) {
    const double lg = std::lgamma(s);
    const double log_p = log_lower_series(s, u) - lg;
    return lg + std::log1p(-std::exp(log_p));
  }
  return log_upper_recurrence(s, u);
}

double upper_inc_gamma(double s, double u) {
  const double lv = log_upper_inc_gamma(s, u);
  const double v = std::exp(lv);
  if (!std::isfinite(v) || v < std::numeric_limits<double>::min()) {
    throw RangeError("upper_inc_gamma(" + std::to_string(s) + ", " + std::to_string(u) +
                     ") is not representable; log value " + std::to_string(lv));
  }
  return v;
}

double lower_inc_gamma(double s, double u) {
  if (!(s > 0.0)) throw DomainError("lower_inc_gamma: order must be > 0 (integral diverges)");
  require_positive_u(u, "lower_inc_gamma");
  if (std::isinf(u)) return std::exp(std::lgamma(s));
  if (u < s + 1.0) return std::exp(log_lower_series(s, u));
  const double lg = std::lgamma(s);
  return std::exp(lg) * -std::expm1(log_upper_inc_gamma(s, u) - lg);
}

double gamma_q(double s, double u) {
  if (!(s > 0.0)) throw DomainError("gamma_q: order must be > 0");
  require_positive_u(u, "gamma_q");
  return std::exp(log_upper_inc_gamma(s, u) - std::lgamma(s));
}

double gamma_p(double s, double u) {
  if (!(s > 0.0)) throw DomainError("gamma_p: order must be > 0");
  require_positive_u(u, "gamma_p");
  const double lg = std::lgamma(s);
  if (u < s + 1.0) return std::exp(log_lower_series(s, u) - lg);
  return -std::expm1(log_upper_inc_gamma(s, u) - lg);
}

double inc_gamma_between(double s, double lo, double hi) {
  if (!(lo >= 0.0) || !(hi >= lo)) {
    throw DomainError("inc_gamma_between: need 0 <= lo <= hi");
  }
  if (lo == hi) return 0.0;
  if (lo == 0.0) {
    if (!(s > 0.0)) throw DivergenceError("inc_gamma_between: integral from 0 diverges for s <= 0");
    if (std::isinf(hi)) return std::exp(std::lgamma(s));
    return lower_inc_gamma(s, hi);
  }
  if (std::isinf(hi)) return std::exp(log_upper_inc_gamma(s, lo));
  if (s > 0.0 && hi <= s + 1.0) {
    const double lh = log_lower_series(s, hi);
    const double ll = log_lower_series(s, lo);
    return std::exp(lh) * -std::expm1(ll - lh);
  }
  const double ll = log_upper_inc_gamma(s, lo);
  const double lh = log_upper_inc_gamma(s, hi);
  return std::exp(ll) * -std::expm1(lh - ll);
}

double log_factorial(int n) {
  if (n < 0) throw DomainError("log_factorial: n must be >= 0");
  return std::lgamma(n + 1.0);
}

Kernel::Kernel(int r) : r_(r), log_norm_(0.0) {
  if (r < 1) throw DomainError("Kernel: r must be >= 1, got " + std::to_string(r));
  log_norm_ = std::lgamma(static_cast<double>(r));
}

double Kernel::log_phi(double nu) const {
  if (!(nu > 0.0)) throw DomainError("phi: nu must be > 0");
  return (r_ - 1) * std::log(nu) - nu - log_norm_;
}

double Kernel::phi(double nu) const {
  if (!(nu > 0.0)) throw DomainError("phi: nu must be > 0");
  if (r_ <= 20 && nu < 1e12) {
    double fact = 1.0;
    for (int i = 2; i < r_; ++i) fact *= i;
    return std::pow(nu, r_ - 1) * std::exp(-nu) / fact;
  }
  return std::exp(log_phi(nu));
}

double Kernel::psi(double x, double omega) const {
  if (!(x > 0.0) || !(omega > 0.0)) throw DomainError("psi: x and omega must be > 0");
  if (std::isinf(x)) return 0.0;
  const double nu = omega / x;
  if (nu == 0.0) return 0.0;
  return phi(nu) * nu / x;
}

double Kernel::log_neg_binomial_pmf(double p, std::int64_t n) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("neg_binomial_pmf: p must be in (0, 1)");
  if (n < r_) throw DomainError("neg_binomial_pmf: n must be >= r");
  double log_binom = 0.0;
  if (r_ <= 256) {
    const double nd = static_cast<double>(n);
    for (int i = 1; i < r_; ++i) log_binom += std::log((nd - i) / i);
  } else {
    log_binom = std::lgamma(static_cast<double>(n)) - log_norm_ -
                std::lgamma(static_cast<double>(n - r_ + 1));
  }
  return log_binom + r_ * std::log(p) + static_cast<double>(n - r_) * std::log1p(-p);
}

double Kernel::neg_binomial_pmf(double p, std::int64_t n) const {
  return std::exp(log_neg_binomial_pmf(p, n));
}

double Kernel::neg_binomial_tail(double p, std::int64_t n) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("neg_binomial_tail: p must be in (0, 1)");
  if (n < r_) return 1.0;
  // terms t_k = C(n, k) p^k (1-p)^(n-k), k = 0..r-1, in log space
  const double nd = static_cast<double>(n);
  const double log_odds = std::log(p) - std::log1p(-p);
  double lt = nd * std::log1p(-p);
  double lmax = lt;
  // the terms increase while k < (n+1)p, so the largest is the last or an
  // interior one; keep a running log-sum-exp
  double acc = 1.0;  // sum of exp(l_k - lmax)
  for (int k = 1; k < r_; ++k) {
    lt += std::log((nd - k + 1.0) / k) + log_odds;
    if (lt > lmax) {
      acc = acc * std::exp(lmax - lt) + 1.0;
      lmax = lt;
    } else {
      acc += std::exp(lt - lmax);
    }
  }
  return std::min(1.0, std::exp(lmax + std::log(acc)));
}

Kernel::FiniteKernel Kernel::phi_finite_p(double p, double nu) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("phi_finite_p: p must be in (0, 1)");
  if (!(nu > 0.0)) throw DomainError("phi_finite_p: nu must be > 0");
  double log_abs = 0.0;
  bool negative = false;
  for (int i = 1; i < r_; ++i) {
    const double f = nu - i * p;
    if (f == 0.0) return {0.0, true};
    if (f < 0.0) negative = !negative;
    log_abs += std::log(std::fabs(f));
  }
  const double lv = (nu / p - r_) * std::log1p(-p) + log_abs - log_norm_;
  const double v = std::exp(lv);
  bool any_nonpositive = false;
  for (int i = 1; i < r_; ++i) any_nonpositive = any_nonpositive || (nu - i * p <= 0.0);
  return {negative ? -v : v, any_nonpositive};
}

}  // namespace ibsrisk
