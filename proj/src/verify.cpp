#include "ibsrisk/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "ibsrisk/asymptotic_risk.hpp"
#include "ibsrisk/error.hpp"
#include "ibsrisk/finite_risk.hpp"
#include "ibsrisk/optimizer.hpp"
#include "ibsrisk/quadrature.hpp"
#include "ibsrisk/special_functions.hpp"

namespace ibsrisk {

namespace {

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string label(const std::string& head, int r, double p = -1.0) {
  std::string s = head + " r=" + std::to_string(r);
  if (p >= 0.0) s += fmt(" p=%g", p);
  return s;
}

// value must stay at or below limit
SuiteRow below(std::string name, double value, double limit) {
  SuiteRow row{std::move(name), value, limit, limit - value, false};
  row.pass = std::isfinite(value) && value <= limit;
  return row;
}

void add(SuiteReport& rep, SuiteRow row) {
  rep.pass = rep.pass && row.pass;
  rep.rows.push_back(std::move(row));
}

struct Range {
  int lo, hi;
};

Range clip(int r_lo, int r_hi, Range def, int min_r) {
  Range r = def;
  if (r_lo > 0) r.lo = r_lo;
  if (r_hi > 0) r.hi = r_hi;
  r.lo = std::max(r.lo, min_r);
  return r;
}

SuiteReport mse_minimax(int r_lo, int r_hi) {
  SuiteReport rep{"mse-minimax", {}, {}, true};
  const auto range = clip(r_lo, r_hi, {3, 10}, 3);
  std::vector<int> rs;
  for (int r = range.lo; r <= range.hi; ++r) rs.push_back(r);
  const std::vector<double> grid = {0.9, 0.5, 0.1, 0.01, 1e-3};
  const auto mm = verify_minimax_mse(rs, grid);
  for (const auto& row : mm.rows) {
    add(rep, below(label("nmse+bound", row.r, row.p), row.value + row.bound, row.threshold));
  }
  rep.notes.push_back("estimator (r-2)/(N-1); limit 1/(r-1); value includes the truncation certificate");
  return rep;
}

SuiteReport mae_stationarity(int r_lo, int r_hi) {
  SuiteReport rep{"mae-stationarity", {}, {}, true};
  const auto range = clip(r_lo, r_hi, {2, 10}, 2);
  const auto mae = LossSpec::mae();
  for (int r = range.lo; r <= range.hi; ++r) {
    const auto opt = find_optimum(mae, r);
    const double fact = std::exp(log_factorial(r - 2));
    const double resid = std::fabs(upper_inc_gamma(r - 1.0, opt.omega_star) - 0.5 * fact) / fact;
    add(rep, below(label("|Gamma(r-1,W*)-(r-2)!/2|/(r-2)!", r), resid, 1e-8));
    if (r == 2) add(rep, below("|W* - ln 2| r=2", std::fabs(opt.omega_star - std::log(2.0)), 1e-8));
  }
  return rep;
}

SuiteReport interval_guarantee(int r_lo, int r_hi) {
  SuiteReport rep{"interval-guarantee", {}, {}, true};
  const auto range = clip(r_lo, r_hi, {3, 5}, 3);
  const std::vector<double> grid = {0.9, 0.5, 0.2, 0.1, 0.05, 0.01, 1e-3};
  struct Shape {
    double A1, A2, mu1, mu2;
  };
  for (const Shape& s : {Shape{1, 1, 3, 3}, Shape{2, 0.5, 4, 2.5}}) {
    const auto loss = LossSpec::generalized_interval(s.A1, s.A2, s.mu1, s.mu2);
    for (int r = range.lo; r <= range.hi; ++r) {
      const double sr = std::sqrt(static_cast<double>(r));
      const double w_lo = (r + sr + 1.0) / s.mu2, w_hi = s.mu1 * (r - sr);
      if (!(w_lo <= w_hi)) continue;
      const double omega = std::sqrt(w_lo * w_hi);
      const auto g = verify_flat_window_guarantee(loss, r, omega, grid);
      if (!g.hypotheses_hold) {
        rep.notes.push_back(label("skipped", r) + ": " + g.skip_reason);
        continue;
      }
      char head[96];
      std::snprintf(head, sizeof head, "eta-eta_bar A=(%g,%g) mu=(%g,%g) W=%.4g", s.A1, s.A2, s.mu1,
                    s.mu2, omega);
      for (const auto& row : g.rows) add(rep, below(label(head, r, row.p), row.eta - g.eta_bar, row.bound));
    }
  }
  rep.notes.push_back("estimator omega/(N+1); limit is the certified error allowance");
  return rep;
}

SuiteReport convergence(int r_lo, int r_hi) {
  SuiteReport rep{"convergence", {}, {}, true};
  const auto range = clip(r_lo, r_hi, {3, 6}, 2);
  const std::vector<double> ps = {1e-1, 1e-2, 1e-3, 1e-4};
  for (const auto& [name, loss] : {std::pair{std::string("mse"), LossSpec::mse()},
                                   std::pair{std::string("mae"), LossSpec::mae()}}) {
    for (int r = range.lo; r <= range.hi; ++r) {
      if (name == "mse" && r < 3) continue;
      const double omega = r - 1.0;
      const double bar = asymptotic_risk(loss, r, omega).value;
      for (int c = -1; c <= 1; ++c) {
        if (c < 1 - r) continue;
        const auto est = Estimator::shifted_reciprocal(omega, c);
        std::vector<double> rel;
        for (double p : ps) rel.push_back(std::fabs(exact_risk(loss, est, r, p).eta - bar) / bar);
        bool decreasing = true;
        std::string trend;
        for (std::size_t i = 0; i < rel.size(); ++i) {
          if (i > 0) decreasing = decreasing && rel[i] < rel[i - 1];
          trend += (i ? " " : "") + fmt("%.2e", rel[i]);
        }
        const std::string head = name + " c=" + std::to_string(c);
        SuiteRow mono{label(head + " decreasing", r), decreasing ? 1.0 : 0.0, 1.0, 0.0, decreasing};
        add(rep, mono);
        add(rep, below(label(head + " rel err p=1e-4", r), rel.back(), 0.01));
        rep.notes.push_back(label(head, r) + " |eta(p)-eta_bar|/eta_bar at p=1e-1..1e-4: " + trend);
      }
    }
  }
  return rep;
}

SuiteReport special_functions_suite() {
  SuiteReport rep{"special-functions", {}, {}, true};
  // recurrence Gamma(s,u) = (s-1) Gamma(s-1,u) + u^(s-1) e^-u
  double worst = 0.0;
  for (double s : {-5.0, -1.5, 0.5, 3.0, 7.25}) {
    for (int i = 0; i <= 40; ++i) {
      const double u = 1e-6 * std::pow(1e8, i / 40.0);
      const double lhs = upper_inc_gamma(s, u);
      const double a = (s - 1.0) * upper_inc_gamma(s - 1.0, u);
      const double b = std::pow(u, s - 1.0) * std::exp(-u);
      // scaled by the term magnitudes: for s < 0, small u the two terms
      // cancel by up to ~(1-s)/u
      worst = std::max(worst, std::fabs(lhs - (a + b)) / (std::fabs(lhs) + std::fabs(a) + std::fabs(b)));
    }
  }
  add(rep, below("recurrence scaled residual", worst, 1e-10));

  worst = 0.0;
  for (double s : {0.5, 1.0, 2.5, 7.0, 20.0}) {
    for (double u : {1e-3, 0.5, 1.0, 5.0, 30.0}) {
      const double g = std::tgamma(s);
      worst = std::max(worst, std::fabs(lower_inc_gamma(s, u) + upper_inc_gamma(s, u) - g) / g);
    }
  }
  add(rep, below("gamma+Gamma=Gamma(s) max rel err", worst, 1e-12));

  worst = 0.0;
  for (double s : {0.5, 2.0, 5.0}) {
    const double u = 1e-6;
    worst = std::max(worst, std::fabs(lower_inc_gamma(s, u) / std::pow(u, s) * s - 1.0));
  }
  add(rep, below("gamma(s,u)/u^s -> 1/s at u=1e-6", worst, 1e-4));
  worst = 0.0;
  for (double s : {0.5, 2.0, 5.0}) {
    const double u = 500.0;
    worst = std::max(worst, std::fabs(std::exp(log_upper_inc_gamma(s, u) - (s - 1.0) * std::log(u) + u) - 1.0));
  }
  add(rep, below("Gamma(s,u)/(u^(s-1)e^-u) -> 1 at u=500", worst, 1e-2));

  worst = 0.0;
  for (int r = 1; r <= 12; ++r) {
    const Kernel k(r);
    QuadratureOptions q;
    q.abs_tol = 1e-14;
    q.rel_tol = 1e-13;
    const double mode = std::max(r - 1.0, 1.0);
    const double head = integrate([&](double v) { return k.phi(v); }, 0.0, mode, q).value;
    const double tail = integrate([&](double v) { return k.phi(v); }, mode, mode + 60.0 + 10.0 * r, q).value;
    worst = std::max(worst, std::fabs(head + tail - 1.0));
  }
  add(rep, below("int phi = 1, r=1..12", worst, 1e-10));

  worst = 0.0;
  for (int r = 1; r <= 8; ++r) {
    const Kernel k(r);
    for (double p : {0.5, 0.1, 0.01}) {
      double sum = 0.0;
      std::int64_t n = r;
      double tail = 1.0;
      for (; tail > 1e-15; ++n) {
        sum += k.neg_binomial_pmf(p, n);
        if ((n - r) % 32 == 0) tail = k.neg_binomial_tail(p, n);
      }
      tail = k.neg_binomial_tail(p, n - 1);
      worst = std::max(worst, std::fabs(sum + tail - 1.0));
    }
  }
  add(rep, below("sum f(n) + certified tail = 1", worst, 1e-9));
  return rep;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"mse-minimax", "mae-stationarity", "interval-guarantee",
                                                 "convergence", "special-functions"};
  return names;
}

std::vector<SuiteReport> run_suites(const std::string& name, int r_lo, int r_hi) {
  if (r_lo > 0 && r_hi > 0 && r_lo > r_hi) throw DomainError("r range is empty");
  std::vector<SuiteReport> out;
  const bool all = name == "all";
  if (!all && std::find(suite_names().begin(), suite_names().end(), name) == suite_names().end()) {
    throw DomainError("unknown suite '" + name + "'");
  }
  if (all || name == "special-functions") out.push_back(special_functions_suite());
  if (all || name == "mse-minimax") out.push_back(mse_minimax(r_lo, r_hi));
  if (all || name == "mae-stationarity") out.push_back(mae_stationarity(r_lo, r_hi));
  if (all || name == "interval-guarantee") out.push_back(interval_guarantee(r_lo, r_hi));
  if (all || name == "convergence") out.push_back(convergence(r_lo, r_hi));
  return out;
}

}  // namespace ibsrisk
