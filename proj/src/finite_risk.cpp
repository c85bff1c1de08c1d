#include "ibsrisk/finite_risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "ibsrisk/error.hpp"
#include "ibsrisk/special_functions.hpp"

namespace ibsrisk {

// ---- estimators ----

Estimator Estimator::shifted_reciprocal(double omega, int c) {
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw DomainError("estimator: omega must be positive and finite");
  }
  Estimator e;
  e.omega_ = omega;
  e.c_ = c;
  return e;
}

Estimator Estimator::table(std::int64_t first_n, std::vector<double> values, double omega, int c) {
  Estimator e = shifted_reciprocal(omega, c);
  if (values.empty()) throw DomainError("estimator table: no values");
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("estimator table: values must be > 0");
  }
  e.first_n_ = first_n;
  e.values_ = std::move(values);
  return e;
}

double Estimator::operator()(std::int64_t n) const {
  if (!values_.empty() && n >= first_n_ && n < tail_start()) {
    return values_[static_cast<std::size_t>(n - first_n_)];
  }
  const std::int64_t d = n + c_;
  if (d < 1) throw DomainError("estimator: n + c must be >= 1");
  return omega_ / static_cast<double>(d);
}

void Estimator::validate_for(int r) const {
  if (r < 1) throw DomainError("estimator: r must be >= 1");
  if (!values_.empty() && first_n_ != r) {
    throw DomainError("estimator table must start at n = r = " + std::to_string(r));
  }
  const std::int64_t first_reciprocal = values_.empty() ? r : tail_start();
  if (first_reciprocal + c_ < 1) {
    throw DomainError("estimator: c = " + std::to_string(c_) + " gives g(n) <= 0 for some n >= r; need c >= " +
                      std::to_string(1 - first_reciprocal));
  }
}

std::string Estimator::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (!values_.empty()) os << "table(" << values_.size() << " values from n=" << first_n_ << ") then ";
  os << omega_ << "/(n" << (c_ < 0 ? "-" : "+") << std::abs(c_) << ")";
  return os.str();
}

// ---- exact series ----

namespace {

struct Neumaier {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::fabs(sum) >= std::fabs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

constexpr std::int64_t kResync = 1024;
constexpr double kTinyLog = -690.0;

// Geometric bound on sum_{n > n0} f(n) M (g(n)/p)^K for K < 0, valid once
// g is the reciprocal tail: the term ratio decreases in n, so the first
// ratio bounds all later ones.
double envelope_tail(const Kernel& ker, const Estimator& est, double p, std::int64_t n0,
                     const LossEnvelope& env) {
  const int r = ker.r();
  const std::int64_t n1 = n0 + 1;
  if (est(n1) / p >= env.x_limit) return std::numeric_limits<double>::infinity();
  const double t1 = ker.neg_binomial_pmf(p, n1) * env.M * std::pow(est(n1) / p, env.K);
  const double nd = static_cast<double>(n1);
  const double c = est.c();
  double rho = nd / (nd - r + 1.0) * (1.0 - p);
  if (env.K != 0.0) rho *= std::pow((nd + c) / (nd + 1.0 + c), env.K);
  if (!(rho < 1.0)) return std::numeric_limits<double>::infinity();
  return t1 / (1.0 - rho);
}

}  // namespace

ExactRiskResult exact_risk(const LossSpec& loss, const Estimator& est, int r, double p,
                           const ExactRiskOptions& opts) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("exact_risk: p must be in (0, 1)");
  if (!(opts.tol > 0.0)) throw DomainError("exact_risk: tol must be > 0");
  est.validate_for(r);
  const Kernel ker(r);
  const bool bounded_at_zero = std::isfinite(loss.limit_at_zero());
  if (!bounded_at_zero && !opts.envelope) {
    throw DomainError(
        "exact_risk: L(0+) is infinite; no tail certificate without an envelope M x^K");
  }

  ExactRiskResult out;
  Neumaier sum;
  double abs_sum = 0.0;
  // f(n) = f_rel * exp(log_base); log_base is folded in once representable
  double log_base = ker.log_neg_binomial_pmf(p, r);
  double f_rel = 1.0;
  if (log_base > kTinyLog) {
    f_rel = std::exp(log_base);
    log_base = 0.0;
  }
  double cdf = 0.0;  // running P[N <= n], heuristic only
  const std::int64_t tail_start = std::max<std::int64_t>(r, est.tail_start());
  std::int64_t next_check = tail_start;
  std::int64_t step = 16;

  std::int64_t n = r;
  double bound = std::numeric_limits<double>::infinity();
  for (; n - r < opts.max_terms; ++n) {
    if (log_base == 0.0) {
      const double term = f_rel * loss(est(n) / p);
      sum.add(term);
      abs_sum += std::fabs(term);
      cdf += f_rel;
    }

    if (n >= next_check) {
      // cheap screen first: 1 - cdf estimates the tail probability
      const double sup_l = bounded_at_zero ? loss.sup_bound_below(est(n + 1) / p)
                                           : std::numeric_limits<double>::infinity();
      const bool screen = log_base == 0.0 && std::isfinite(sup_l) &&
                          (1.0 - cdf) * sup_l <= 8.0 * opts.tol;
      if (screen || !bounded_at_zero || (n - r) % (64 * kResync) == 0) {
        double b = std::numeric_limits<double>::infinity();
        if (std::isfinite(sup_l)) b = ker.neg_binomial_tail(p, n) * (1.0 + 1e-12) * sup_l;
        if (opts.envelope && !(b <= opts.tol)) {
          b = std::min(b, envelope_tail(ker, est, p, n, *opts.envelope));
        }
        bound = b;
        if (b <= opts.tol) {
          ++n;
          out.converged = true;
          break;
        }
      }
      next_check = n + step;
      step = std::min<std::int64_t>(step * 2, 256);
    }

    // advance f(n) -> f(n+1)
    const double nd = static_cast<double>(n);
    f_rel *= nd / (nd - r + 1.0) * (1.0 - p);
    if ((n + 1 - r) % kResync == 0) {
      const double lf = ker.log_neg_binomial_pmf(p, n + 1);
      if (lf > kTinyLog) {
        f_rel = std::exp(lf);
        log_base = 0.0;
      } else {
        f_rel = 1.0;
        log_base = lf;
      }
    } else if (log_base != 0.0) {
      if (f_rel > 1e200 || f_rel < 1e-200) {
        log_base += std::log(f_rel);
        f_rel = 1.0;
      }
      if (log_base + std::log(f_rel) > kTinyLog) {
        f_rel = std::exp(log_base + std::log(f_rel));
        log_base = 0.0;
      }
    }
  }
  out.terms = n - r;
  if (!out.converged) {
    // cap hit: report the certificate actually achieved at the stopping point
    const std::int64_t last = n - 1;
    const double sup_l = bounded_at_zero ? loss.sup_bound_below(est(last + 1) / p)
                                         : std::numeric_limits<double>::infinity();
    double b = std::isfinite(sup_l) ? ker.neg_binomial_tail(p, last) * (1.0 + 1e-12) * sup_l
                                    : std::numeric_limits<double>::infinity();
    if (opts.envelope) b = std::min(b, envelope_tail(ker, est, p, last, *opts.envelope));
    bound = b;
  }
  out.eta = sum.value();
  out.truncation_bound = bound;
  // pmf drift between resyncs is at most ~kResync * 2 eps relative
  out.rounding_bound = 1e-12 * abs_sum;
  return out;
}

// ---- Monte Carlo ----

namespace {

struct Moments {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  void merge(const Moments& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
    const double nt = na + nb;
    const double d = o.mean - mean;
    mean += d * nb / nt;
    m2 += o.m2 + d * d * na * nb / nt;
    n += o.n;
  }
};

std::mt19937_64 batch_rng(std::uint64_t seed, std::uint64_t batch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(batch), static_cast<std::uint32_t>(batch >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

SimulationResult simulate_statistic(int r, double p, const SimConfig& cfg,
                                    const std::function<double(std::int64_t)>& statistic) {
  if (r < 1) throw DomainError("simulate: r must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("simulate: p must be in (0, 1)");
  if (cfg.samples < 1) throw DomainError("simulate: samples must be >= 1");
  if (cfg.batch < 1) throw DomainError("simulate: batch must be >= 1");

  const std::uint64_t nb = (cfg.samples + cfg.batch - 1) / cfg.batch;
  std::vector<Moments> parts(nb);
  auto run = [&](std::uint64_t b) {
    auto rng = batch_rng(cfg.seed, b);
    const std::uint64_t count = std::min(cfg.batch, cfg.samples - b * cfg.batch);
    Moments m;
    for (std::uint64_t i = 0; i < count; ++i) m.push(statistic(draw_trials(rng, r, p)));
    parts[b] = m;
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(nb)));
  if (threads == 1) {
    for (std::uint64_t b = 0; b < nb; ++b) run(b);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::uint64_t b = t; b < nb; b += threads) run(b);
        } catch (...) {
          errs[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs) {
      if (e) std::rethrow_exception(e);
    }
  }

  Moments all;
  for (const auto& m : parts) all.merge(m);
  SimulationResult res;
  res.samples = all.n;
  res.mean = all.mean;
  res.stderr_ = all.n > 1 ? std::sqrt(all.m2 / static_cast<double>(all.n - 1) / static_cast<double>(all.n))
                          : std::numeric_limits<double>::infinity();
  return res;
}

SimulationResult simulate_risk(const LossSpec& loss, const Estimator& est, int r, double p,
                               const SimConfig& cfg) {
  est.validate_for(r);
  return simulate_statistic(r, p, cfg, [&](std::int64_t n) { return loss(est(n) / p); });
}

// ---- sweeps ----

std::string to_string(BoundKind k) {
  switch (k) {
    case BoundKind::exact_truncation: return "exact_truncation";
    case BoundKind::monte_carlo_stderr: return "monte_carlo_stderr";
    case BoundKind::asymptotic: return "asymptotic";
    case BoundKind::error: return "error";
  }
  return "error";
}

bool RiskCurve::any_failed() const {
  return std::any_of(records.begin(), records.end(),
                     [](const RiskRecord& x) { return x.kind == BoundKind::error; });
}

namespace {

RiskRecord error_record(double p, const std::string& msg) {
  RiskRecord rec;
  rec.p = p;
  rec.eta = std::numeric_limits<double>::quiet_NaN();
  rec.kind = BoundKind::error;
  rec.error_bound = std::numeric_limits<double>::quiet_NaN();
  rec.message = msg;
  return rec;
}

RiskRecord reference_record(const LossSpec& loss, const Estimator& est, int r) {
  try {
    const auto q = asymptotic_risk(loss, r, est.omega());
    RiskRecord rec;
    rec.p = 0.0;
    rec.eta = q.value;
    rec.kind = BoundKind::asymptotic;
    rec.error_bound = q.abs_error_estimate;
    return rec;
  } catch (const std::exception& e) {
    return error_record(0.0, e.what());
  }
}

void sort_grid(std::vector<double>& g) {
  std::sort(g.begin(), g.end(), std::greater<>());
  g.erase(std::unique(g.begin(), g.end()), g.end());
}

}  // namespace

RiskCurve risk_sweep(const LossSpec& loss, const Estimator& est, int r, std::vector<double> p_grid,
                     const ExactRiskOptions& opts) {
  sort_grid(p_grid);
  RiskCurve curve;
  curve.records.resize(p_grid.size());
  std::vector<std::thread> pool;
  const unsigned hw = std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
  for (unsigned t = 0; t < hw; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < p_grid.size(); i += hw) {
        const double p = p_grid[i];
        try {
          const auto res = exact_risk(loss, est, r, p, opts);
          RiskRecord rec;
          rec.p = p;
          rec.eta = res.eta;
          rec.kind = BoundKind::exact_truncation;
          rec.error_bound = res.truncation_bound + res.rounding_bound;
          if (!res.converged) rec.message = "term cap reached before tolerance";
          curve.records[i] = rec;
        } catch (const std::exception& e) {
          curve.records[i] = error_record(p, e.what());
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  curve.records.push_back(reference_record(loss, est, r));
  return curve;
}

RiskCurve simulate_sweep(const LossSpec& loss, const Estimator& est, int r, std::vector<double> p_grid,
                         const SimConfig& cfg) {
  sort_grid(p_grid);
  RiskCurve curve;
  for (double p : p_grid) {
    try {
      const auto s = simulate_risk(loss, est, r, p, cfg);
      RiskRecord rec;
      rec.p = p;
      rec.eta = s.mean;
      rec.kind = BoundKind::monte_carlo_stderr;
      rec.error_bound = s.stderr_;
      curve.records.push_back(rec);
    } catch (const std::exception& e) {
      curve.records.push_back(error_record(p, e.what()));
    }
  }
  curve.records.push_back(reference_record(loss, est, r));
  return curve;
}

// ---- guarantees ----

MinimaxReport verify_minimax_mse(const std::vector<int>& r_list, const std::vector<double>& p_grid) {
  for (int r : r_list) {
    if (r < 3) throw DomainError("verify_minimax_mse: r must be >= 3, got " + std::to_string(r));
  }
  const LossSpec mse = LossSpec::mse();
  MinimaxReport rep;
  ExactRiskOptions opts;
  opts.tol = 1e-13;
  for (int r : r_list) {
    const auto est = Estimator::shifted_reciprocal(r - 2.0, -1);
    for (double p : p_grid) {
      MinimaxRow row;
      row.r = r;
      row.p = p;
      row.threshold = 1.0 / (r - 1.0);
      const auto res = exact_risk(mse, est, r, p, opts);
      row.value = res.eta;
      row.bound = res.truncation_bound + res.rounding_bound;
      row.margin = row.threshold - (row.value + row.bound);
      row.pass = row.margin > 0.0;
      rep.all_pass = rep.all_pass && row.pass;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

namespace {

// Finds the maximal run of equal-valued constant segments containing x.
std::optional<std::pair<double, double>> constant_run(const LossSpec& loss, double x) {
  const auto& segs = loss.segments();
  std::size_t i = 0;
  while (i < segs.size() && !(x >= segs[i].lo && x < segs[i].hi)) ++i;
  if (i == segs.size() || !segs[i].is_constant()) return std::nullopt;
  auto level = [](const Segment& s) {
    double v = 0.0;
    for (const auto& t : s.terms) v += t.coef;
    return v;
  };
  const double v = level(segs[i]);
  std::size_t a = i, b = i;
  while (a > 0 && segs[a - 1].is_constant() && level(segs[a - 1]) == v) --a;
  while (b + 1 < segs.size() && segs[b + 1].is_constant() && level(segs[b + 1]) == v) ++b;
  return std::make_pair(segs[a].lo, segs[b].hi);
}

bool monotone_on(const LossSpec& loss, double lo, double hi, bool non_increasing) {
  if (!(hi > lo)) return true;
  const auto grid = sample_grid(loss, lo, hi, 2000);
  double prev = loss.evaluate(grid.front().first);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    // compare left limits as well so jumps at breakpoints are seen
    const double x = grid[i].first;
    for (double v : {loss.left_limit(x), loss.evaluate(x)}) {
      const double tol = 1e-12 * std::max({1.0, std::fabs(v), std::fabs(prev)});
      if (non_increasing ? v > prev + tol : v < prev - tol) return false;
      prev = v;
    }
  }
  return true;
}

}  // namespace

GuaranteeReport verify_flat_window_guarantee(const LossSpec& loss, int r, double omega,
                                    const std::vector<double>& p_grid) {
  if (r < 3) throw DomainError("verify_flat_window_guarantee: r must be >= 3");
  if (!(omega > 0.0)) throw DomainError("verify_flat_window_guarantee: omega must be > 0");
  GuaranteeReport rep;
  const double sr = std::sqrt(static_cast<double>(r));
  const double x_lo = omega / (r + sr + 1.0);
  const double x_hi = omega / (r - sr);

  std::optional<std::pair<double, double>> run;
  if (loss.is_piecewise_power()) {
    run = constant_run(loss, x_lo);
  } else {
    // callbacks: check constancy on a grid over the required interval
    const auto grid = sample_grid(loss, x_lo, x_hi, 2000);
    const double v = loss(x_lo);
    bool flat = true;
    for (const auto& [x, y] : grid) flat = flat && y == v;
    if (flat) run = std::make_pair(x_lo, x_hi);
  }
  if (!run) {
    rep.skip_reason = "loss is not constant on an interval containing omega/(r+sqrt(r)+1)";
    return rep;
  }
  rep.upsilon = run->first;
  rep.upsilon_prime = run->second;
  if (!(rep.upsilon <= x_lo)) {
    rep.skip_reason = "upsilon > omega/(r+sqrt(r)+1)";
    return rep;
  }
  if (!(rep.upsilon_prime >= x_hi)) {
    rep.skip_reason = "upsilon' < omega/(r-sqrt(r))";
    return rep;
  }
  if (rep.upsilon > 0.0 && !monotone_on(loss, rep.upsilon * 1e-8, rep.upsilon, true)) {
    rep.skip_reason = "loss is not non-increasing on (0, upsilon]";
    return rep;
  }
  if (std::isfinite(rep.upsilon_prime) &&
      !monotone_on(loss, rep.upsilon_prime, rep.upsilon_prime * 1e8, false)) {
    rep.skip_reason = "loss is not non-decreasing on [upsilon', inf)";
    return rep;
  }
  rep.hypotheses_hold = true;

  const auto est = Estimator::shifted_reciprocal(omega, 1);
  const auto bar = asymptotic_risk(loss, r, omega);
  rep.eta_bar = bar.value;
  ExactRiskOptions opts;
  opts.tol = 1e-13;
  rep.all_pass = true;
  for (double p : p_grid) {
    const auto res = exact_risk(loss, est, r, p, opts);
    GuaranteeRow row;
    row.p = p;
    row.eta = res.eta;
    row.bound = res.truncation_bound + res.rounding_bound + bar.abs_error_estimate;
    row.pass = row.eta <= rep.eta_bar + row.bound;
    rep.all_pass = rep.all_pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace ibsrisk
