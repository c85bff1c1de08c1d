#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>

#include "ibsrisk/asymptotic_risk.hpp"
#include "ibsrisk/error.hpp"
#include "ibsrisk/finite_risk.hpp"

using namespace ibsrisk;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// straight sum in long double with lgamma pmf; L(g(n)/p) <= lmax for all n
long double brute_risk(const LossSpec& loss, const Estimator& est, int r, double p, double lmax) {
  long double sum = 0.0L;
  const long double lq = std::log1p(-(long double)p), lp = std::log((long double)p);
  for (long n = r;; ++n) {
    const long double lf = std::lgamma((long double)n) - std::lgamma((long double)r) -
                           std::lgamma((long double)(n - r + 1)) + r * lp + (n - r) * lq;
    const long double f = std::exp(lf);
    sum += f * loss(est(n) / p);
    // past the mode the pmf ratio is below 1 - p/2 once n > 2r/p, so the
    // rest of the sum is under f * lmax * 2/p
    if (n > 2.0 * r / p && f * lmax * 2.0L / p < 1e-18L) break;
  }
  return sum;
}

std::vector<std::pair<std::string, LossSpec>> bounded_builtins() {
  return {{"constant", LossSpec::constant(1.0)},
          {"mse", LossSpec::mse()},
          {"mae", LossSpec::mae()},
          {"interval", LossSpec::interval_confidence(2.0, 2.0)},
          {"gi", LossSpec::generalized_interval(1.0, 2.0, 1.5, 3.0)}};
}
}  // namespace

TEST_CASE("constant loss has risk one") {
  const auto res = exact_risk(LossSpec::constant(1.0), Estimator::shifted_reciprocal(3.0, 0), 4, 0.3);
  CHECK(std::fabs(res.eta - 1.0) <= res.truncation_bound + res.rounding_bound + 1e-15);
  CHECK(res.converged);
}

TEST_CASE("series matches a direct long double sum") {
  for (const auto& [name, loss] : bounded_builtins()) {
    for (int r : {2, 3, 6}) {
      for (double p : {0.7, 0.2, 0.03}) {
        for (int c : {-1, 0, 1}) {
          if (c < 1 - r) continue;
          const auto est = Estimator::shifted_reciprocal(r - 0.5, c);
          const double lmax = std::max(1.0, loss(est(r) / p)) * 2.0;
          const auto res = exact_risk(loss, est, r, p);
          const double oracle = static_cast<double>(brute_risk(loss, est, r, p, lmax));
          CAPTURE(name);
          CAPTURE(r);
          CAPTURE(p);
          CAPTURE(c);
          CHECK(std::fabs(res.eta - oracle) <= 1e-12 * std::max(1.0, std::fabs(oracle)));
        }
      }
    }
  }
}

TEST_CASE("truncation bound meets the tolerance for built-in losses") {
  for (const auto& [name, loss] : bounded_builtins()) {
    for (int r = 2; r <= 8; ++r) {
      for (double p : {0.5, 0.1, 0.01}) {
        ExactRiskOptions opts;
        opts.tol = 1e-12;
        const auto res = exact_risk(loss, Estimator::shifted_reciprocal(r, 0), r, p, opts);
        CAPTURE(name);
        CAPTURE(r);
        CAPTURE(p);
        CHECK(res.converged);
        CHECK(res.truncation_bound <= 1e-12);
        CHECK(res.truncation_bound >= 0.0);
      }
    }
  }
}

TEST_CASE("unbiased estimator has normalized MSE tending to 1/(r-2)") {
  const auto res = exact_risk(LossSpec::mse(), Estimator::shifted_reciprocal(4.0, -1), 5, 1e-4);
  CHECK(std::fabs(res.eta - 1.0 / 3.0) / (1.0 / 3.0) < 1e-3);
  CHECK(res.terms > 10000);
}

TEST_CASE("minimax MSE estimator stays below 1/(r-1)") {
  const auto a = exact_risk(LossSpec::mse(), Estimator::shifted_reciprocal(1.0, -1), 3, 0.5);
  CHECK(a.eta < 0.5);
  // r=3: eta = (p/2) sum_k (k+1)/(k+2) q^k = (p/2)(1/p - (-ln p - q)/q^2); 1 - ln 2 at p=1/2
  const double oracle = 1.0 - std::log(2.0);
  // the dropped tail is nonnegative
  CHECK(a.eta <= oracle + a.rounding_bound);
  CHECK(oracle <= a.eta + a.truncation_bound + a.rounding_bound);
  CHECK(std::fabs(a.eta - oracle) < 1e-12);

  const auto rep = verify_minimax_mse({3, 10}, {0.9, 1e-3});
  CHECK(rep.all_pass);
  REQUIRE(rep.rows.size() == 4);
  for (const auto& row : rep.rows) {
    CHECK(row.value + row.bound < row.threshold);
    CHECK(row.margin > 0.0);
  }
  CHECK_THROWS_AS(verify_minimax_mse({2}, {0.5}), DomainError);
}

TEST_CASE("sweep of the minimax estimator approaches 1/2 from below") {
  const auto curve = risk_sweep(LossSpec::mse(), Estimator::shifted_reciprocal(1.0, -1), 3,
                                {1e-3, 0.5, 0.01, 0.1});
  REQUIRE(curve.records.size() == 5);
  CHECK_FALSE(curve.any_failed());
  for (std::size_t i = 0; i + 1 < curve.records.size(); ++i) {
    CHECK(curve.records[i].p > curve.records[i + 1].p);
    if (i + 2 < curve.records.size()) CHECK(curve.records[i].eta < curve.records[i + 1].eta);
    CHECK(curve.records[i].eta < 0.5);
    CHECK(curve.records[i].kind == BoundKind::exact_truncation);
    CHECK(std::isfinite(curve.records[i].error_bound));
  }
  CHECK(curve.records.back().p == 0.0);
  CHECK(curve.records.back().kind == BoundKind::asymptotic);
  CHECK(std::fabs(curve.records.back().eta - 0.5) < 1e-12);

  const auto one = risk_sweep(LossSpec::mae(), Estimator::shifted_reciprocal(2.0, 0), 3, {0.2});
  CHECK(one.records.size() == 2);
}

TEST_CASE("sweep records per-point errors and continues") {
  // r=2 with MSE: asymptotic risk diverges, finite points are fine
  const auto curve = risk_sweep(LossSpec::mse(), Estimator::shifted_reciprocal(1.0, 0), 2, {0.5, 0.1});
  REQUIRE(curve.records.size() == 3);
  CHECK(curve.records[0].kind == BoundKind::exact_truncation);
  CHECK(curve.records[2].kind == BoundKind::error);
  CHECK_FALSE(curve.records[2].message.empty());
  CHECK(curve.any_failed());
}

TEST_CASE("estimator validation") {
  CHECK_NOTHROW(Estimator::shifted_reciprocal(2.0, -2).validate_for(3));
  CHECK_THROWS_AS(Estimator::shifted_reciprocal(2.0, -3).validate_for(3), DomainError);
  CHECK_THROWS_AS(Estimator::shifted_reciprocal(0.0, 0), DomainError);
  CHECK_THROWS_AS(Estimator::shifted_reciprocal(-1.0, 0), DomainError);
  const auto t = Estimator::table(4, {0.9, 0.6}, 3.0, 0);
  CHECK(t.is_table());
  CHECK(t(4) == 0.9);
  CHECK(t(5) == 0.6);
  CHECK(t(6) == doctest::Approx(0.5));
  CHECK_NOTHROW(t.validate_for(4));
  CHECK_THROWS_AS(t.validate_for(3), DomainError);
  CHECK_THROWS_AS(Estimator::table(3, {0.5, -0.1}, 3.0, 0), DomainError);
}

TEST_CASE("table estimator equal to the reciprocal rule gives the same risk") {
  const int r = 4;
  const double p = 0.05;
  const auto plain = Estimator::shifted_reciprocal(3.0, 1);
  std::vector<double> vals;
  for (int n = r; n < r + 20; ++n) vals.push_back(3.0 / (n + 1));
  const auto tab = Estimator::table(r, vals, 3.0, 1);
  ExactRiskOptions opts;
  opts.tol = 1e-15;
  const auto a = exact_risk(LossSpec::mae(), plain, r, p, opts);
  const auto b = exact_risk(LossSpec::mae(), tab, r, p, opts);
  CHECK(std::fabs(a.eta - b.eta) < 1e-14);
}

TEST_CASE("unbounded loss near zero needs an envelope") {
  // L(x) = 1/x on (0,1), then x: K = -1
  const auto loss = LossSpec::piecewise_power(
      {{0.0, 1.0, {{1.0, -1.0}}}, {1.0, kInf, {{1.0, 1.0}}}});
  const auto est = Estimator::shifted_reciprocal(2.0, 0);
  CHECK_THROWS_AS(exact_risk(loss, est, 3, 0.2), DomainError);
  ExactRiskOptions opts;
  opts.envelope = LossEnvelope{1.0, -1.0, 1.0};
  const auto res = exact_risk(loss, est, 3, 0.2, opts);
  CHECK(res.converged);
  CHECK(res.truncation_bound <= opts.tol);
  // E[max(p/g, g/p)]: brute force, tail of L ~ N which is summable
  long double s = 0.0L;
  for (long n = 3; n < 3000; ++n) {
    const long double f = std::exp(std::lgamma((long double)n) - std::lgamma(3.0L) -
                                   std::lgamma((long double)(n - 2)) + 3 * std::log(0.2L) +
                                   (n - 3) * std::log(0.8L));
    const long double x = 2.0L / n / 0.2L;
    s += f * (x < 1 ? 1 / x : x);
  }
  CHECK(std::fabs(res.eta - static_cast<double>(s)) < 1e-11 * static_cast<double>(s));
}

TEST_CASE("simulation reproduces the negative binomial mean") {
  SimConfig cfg;
  cfg.samples = 1'000'000;
  cfg.seed = 7;
  const auto sim = simulate_statistic(2, 0.5, cfg, [](std::int64_t n) { return double(n); });
  CHECK(sim.samples == cfg.samples);
  CHECK(std::fabs(sim.mean - 4.0) < 4.0 * sim.stderr_);
}

TEST_CASE("simulation is deterministic and independent of threading") {
  SimConfig cfg;
  cfg.samples = 200'000;
  cfg.seed = 12345;
  cfg.batch = 10'000;
  const auto loss = LossSpec::mse();
  const auto est = Estimator::shifted_reciprocal(1.0, -1);
  const auto a = simulate_risk(loss, est, 3, 0.1, cfg);
  const auto b = simulate_risk(loss, est, 3, 0.1, cfg);
  cfg.threads = 4;
  const auto c = simulate_risk(loss, est, 3, 0.1, cfg);
  CHECK(a.mean == b.mean);
  CHECK(a.stderr_ == b.stderr_);
  CHECK(a.mean == c.mean);
  CHECK(a.stderr_ == c.stderr_);
  cfg.seed = 12346;
  CHECK(simulate_risk(loss, est, 3, 0.1, cfg).mean != a.mean);
}

TEST_CASE("simulation agrees with the exact series") {
  SimConfig cfg;
  cfg.samples = 400'000;
  cfg.seed = 99;
  const auto est = Estimator::shifted_reciprocal(1.0, -1);
  const auto sim = simulate_risk(LossSpec::mse(), est, 3, 0.1, cfg);
  const auto ex = exact_risk(LossSpec::mse(), est, 3, 0.1);
  CHECK(std::fabs(sim.mean - ex.eta) < 4.0 * sim.stderr_);

  const auto gi = LossSpec::generalized_interval(1.0, 1.0, 2.0, 2.0);
  const auto e2 = Estimator::shifted_reciprocal(3.5, 0);
  const auto s2 = simulate_risk(gi, e2, 5, 0.02, cfg);
  CHECK(std::fabs(s2.mean - exact_risk(gi, e2, 5, 0.02).eta) < 4.0 * s2.stderr_);
}

TEST_CASE("unbiasedness and bias identities") {
  SimConfig cfg;
  cfg.samples = 1'000'000;
  cfg.seed = 2024;
  for (int r : {3, 5}) {
    const double p = 0.05;
    const auto unb = simulate_statistic(r, p, cfg, [r](std::int64_t n) { return (r - 1.0) / (n - 1.0); });
    CHECK(std::fabs(unb.mean - p) < 4.0 * unb.stderr_);
    const auto biased = simulate_statistic(
        r, p, cfg, [r, p](std::int64_t n) { return ((r - 2.0) / (n - 1.0) - p) / p; });
    CHECK(std::fabs(biased.mean + 1.0 / (r - 1.0)) < 4.0 * biased.stderr_);
  }
}

TEST_CASE("estimator family converges to one limit") {
  for (const auto& loss : {LossSpec::mse(), LossSpec::mae()}) {
    const int r = 4;
    const double omega = 3.0;
    const double bar = asymptotic_risk(loss, r, omega).value;
    for (int c : {-1, 0, 1}) {
      const auto res = exact_risk(loss, Estimator::shifted_reciprocal(omega, c), r, 1e-4);
      CAPTURE(c);
      CHECK(std::fabs(res.eta - bar) / bar < 1e-2);
    }
  }
}

TEST_CASE("interval guarantee for the omega/(N+1) estimator") {
  const auto gi = LossSpec::generalized_interval(1.0, 1.0, 3.0, 3.0);
  const std::vector<double> grid{0.9, 0.5, 0.1, 0.01, 1e-3};
  // r=4: need 1/mu2 <= 3/7 and mu1 >= 3/2
  const auto rep = verify_flat_window_guarantee(gi, 4, 3.0, grid);
  CHECK(rep.hypotheses_hold);
  CHECK(rep.all_pass);
  CHECK(rep.rows.size() == grid.size());
  for (const auto& row : rep.rows) CHECK(row.eta <= rep.eta_bar + row.bound);
  CHECK(rep.upsilon == doctest::Approx(1.0 / 3.0));
  CHECK(rep.upsilon_prime == doctest::Approx(3.0));

  // lower edge too high: 1/mu2 = 0.5 > 3/7
  const auto skip = verify_flat_window_guarantee(LossSpec::generalized_interval(1.0, 1.0, 3.0, 2.0), 4, 3.0, grid);
  CHECK_FALSE(skip.hypotheses_hold);
  CHECK_FALSE(skip.skip_reason.empty());
  CHECK(skip.rows.empty());

  const auto mae = verify_flat_window_guarantee(LossSpec::mae(), 4, 3.0, grid);
  CHECK_FALSE(mae.hypotheses_hold);
  CHECK(mae.rows.empty());
}
