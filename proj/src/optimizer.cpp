#include "ibsrisk/optimizer.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "ibsrisk/error.hpp"

namespace ibsrisk {

namespace {

struct Refined {
  double omega;
  int iterations;
};

Refined bisect(const RiskEvaluator& ev, int r, double lo, double hi, const OptimizerConfig& cfg) {
  int it = 0;
  while (it < cfg.max_bisections) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    ++it;
    const auto s = ev.slope(r, mid);
    const int sign = s.sign();
    if (sign == 0) return {mid, it};
    if (sign < 0) {
      lo = mid;
    } else {
      hi = mid;
    }
    const double w = 0.5 * (lo + hi);
    if (hi - lo <= cfg.omega_rel_tol * w) {
      const double eta = ev.risk(r, w).value;
      const double d = ev.slope(r, w).value;
      if (std::fabs(d) * w <= cfg.residual_rel_tol * std::max(std::fabs(eta), 1e-300)) {
        return {w, it};
      }
    }
  }
  return {0.5 * (lo + hi), it};
}

}  // namespace

OptimumResult find_optimum(const LossSpec& loss, int r, const OptimizerConfig& cfg) {
  if (r < 1) throw DomainError("find_optimum: r must be >= 1");
  const RiskEvaluator ev(loss, cfg.risk);
  OptimumResult out;
  out.unchecked_hypotheses.push_back(
      "right-side flatness condition (ii) at xi' is not verified numerically");

  try {
    out.left_condition_holds = loss.xi() ? check_left_condition(loss, r).holds : false;
  } catch (const std::exception&) {
    out.left_condition_holds = false;
  }

  // bracket a - to + sign change
  const double start = static_cast<double>(r);
  const int s0 = ev.slope(r, start).sign();
  std::optional<double> neg, pos;
  if (s0 < 0) neg = start;
  if (s0 > 0) pos = start;
  int evals = 1;
  if (s0 <= 0) {
    double w = start;
    for (int k = 0; k < cfg.max_doublings && !pos; ++k) {
      w *= 2.0;
      ++evals;
      const int s = ev.slope(r, w).sign();
      if (s > 0) pos = w;
      if (s < 0) neg = w;
    }
  }
  if (s0 >= 0 && pos) {
    double w = start;
    for (int k = 0; k < cfg.max_doublings && !neg; ++k) {
      w *= 0.5;
      ++evals;
      if (ev.slope(r, w).sign() < 0) neg = w;
    }
  }
  if (!neg || !pos) {
    throw NoOptimumError(
        "no sign change of d eta_bar / d omega found between r*2^-" +
        std::to_string(cfg.max_doublings) + " and r*2^" + std::to_string(cfg.max_doublings) +
        "; the asymptotic risk is monotone there and has no minimizer in (0, inf)");
  }
  // log-spaced scan for every - to + sign change. Besides the seed bracket
  // it covers the omegas at which the breakpoints of L meet the kernel bulk,
  // so a basin away from the seed is not missed.
  double scan_lo = *neg, scan_hi = *pos;
  const auto& bps = loss.breakpoints();
  if (!bps.empty()) {
    scan_lo = std::min(scan_lo, start * bps.front() / 16.0);
    scan_hi = std::max(scan_hi, start * bps.back() * 16.0);
  }
  const int n = std::max({cfg.scan_points, 2,
                          static_cast<int>(std::ceil(8.0 * std::log2(scan_hi / scan_lo)))});
  std::vector<double> grid(n);
  std::vector<int> signs(n);
  for (int i = 0; i < n; ++i) grid[i] = scan_lo * std::pow(scan_hi / scan_lo, double(i) / (n - 1));
  grid.front() = scan_lo;
  grid.back() = scan_hi;
  for (int i = 0; i < n; ++i) signs[i] = ev.slope(r, grid[i]).sign();
  evals += n;

  std::vector<std::pair<double, double>> brackets;
  int last = -1;  // index of the last resolved point
  for (int i = 0; i < n; ++i) {
    if (signs[i] == 0) continue;
    if (last >= 0 && signs[last] < 0 && signs[i] > 0) brackets.emplace_back(grid[last], grid[i]);
    last = i;
  }
  if (brackets.empty()) brackets.emplace_back(*neg, *pos);

  double best_eta = std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : brackets) {
    const auto ref = bisect(ev, r, a, b, cfg);
    out.iterations += ref.iterations;
    out.candidates.push_back(ref.omega);
    const double eta = ev.risk(r, ref.omega).value;
    if (eta < best_eta) {
      best_eta = eta;
      out.omega_star = ref.omega;
      out.bracket_lo = a;
      out.bracket_hi = b;
    }
  }
  out.multiplicity_warning = brackets.size() > 1;
  out.iterations += evals;
  out.eta_star = best_eta;
  const auto slope = ev.slope(r, out.omega_star);
  out.stationarity_residual = slope.value;
  out.converged = slope.sign() == 0 || std::fabs(slope.value) * out.omega_star <=
                                           cfg.residual_rel_tol * std::fabs(out.eta_star);
  return out;
}

}  // namespace ibsrisk
