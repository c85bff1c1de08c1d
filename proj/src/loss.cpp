#include "ibsrisk/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ibsrisk/error.hpp"
#include "ibsrisk/quadrature.hpp"

namespace ibsrisk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// coef * x^power at x = 0+, as a limit
double term_at_zero(const PowerTerm& t) {
  if (t.coef == 0.0 || t.power > 0.0) return 0.0;
  if (t.power == 0.0) return t.coef;
  return t.coef > 0.0 ? kInf : -kInf;
}

double term_at(const PowerTerm& t, double x) {
  if (x == 0.0) return term_at_zero(t);
  if (std::isinf(x)) {
    if (t.coef == 0.0 || t.power < 0.0) return 0.0;
    if (t.power == 0.0) return t.coef;
    return t.coef > 0.0 ? kInf : -kInf;
  }
  return t.coef * std::pow(x, t.power);
}

void validate_segments(const std::vector<Segment>& segs) {
  if (segs.empty()) throw DomainError("loss: at least one segment is required");
  if (segs.front().lo != 0.0) throw DomainError("loss: first segment must start at 0");
  if (!std::isinf(segs.back().hi)) throw DomainError("loss: last segment must end at +inf");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& s = segs[i];
    if (!(s.lo < s.hi)) throw DomainError("loss: segment " + std::to_string(i) + " has lo >= hi");
    if (i + 1 < segs.size() && s.hi != segs[i + 1].lo) {
      throw DomainError("loss: segments " + std::to_string(i) + " and " + std::to_string(i + 1) +
                        " are not contiguous");
    }
    for (const auto& t : s.terms) {
      if (!std::isfinite(t.coef) || !std::isfinite(t.power)) {
        throw DomainError("loss: non-finite term in segment " + std::to_string(i));
      }
    }
  }
}

}  // namespace

double Segment::eval(double x) const {
  double v = 0.0;
  for (const auto& t : terms) v += t.coef * std::pow(x, t.power);
  return v;
}

bool Segment::is_constant() const {
  return std::all_of(terms.begin(), terms.end(),
                     [](const PowerTerm& t) { return t.coef == 0.0 || t.power == 0.0; });
}

LossSpec LossSpec::piecewise_power(std::vector<Segment> segments, Metadata meta) {
  validate_segments(segments);
  LossSpec loss;
  loss.segments_ = std::move(segments);
  for (std::size_t i = 1; i < loss.segments_.size(); ++i) {
    loss.breakpoints_.push_back(loss.segments_[i].lo);
  }

  double k0 = kInf;
  for (const auto& t : loss.segments_.front().terms) {
    if (t.coef != 0.0) k0 = std::min(k0, t.power);
  }
  double kinf = -kInf;
  for (const auto& t : loss.segments_.back().terms) {
    if (t.coef != 0.0) kinf = std::max(kinf, t.power);
  }
  loss.K_ = meta.K.value_or(std::isinf(k0) ? 0.0 : k0);
  loss.K_prime_ = meta.K_prime.value_or(std::isinf(kinf) ? 0.0 : kinf);
  loss.xi_ = meta.xi;
  loss.xi_prime_ = meta.xi_prime;
  if (!loss.xi_ && !loss.breakpoints_.empty()) loss.xi_ = loss.breakpoints_.front();
  if (!loss.xi_prime_ && !loss.breakpoints_.empty()) loss.xi_prime_ = loss.breakpoints_.back();
  return loss;
}

LossSpec LossSpec::callback(std::function<double(double)> fn, std::vector<double> breakpoints,
                            double K, double K_prime, std::optional<double> xi,
                            std::optional<double> xi_prime) {
  if (!fn) throw DomainError("loss: empty callback");
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
  for (double b : breakpoints) {
    if (!(b > 0.0) || !std::isfinite(b)) throw DomainError("loss: breakpoints must be finite and > 0");
  }
  LossSpec loss;
  loss.kind_ = "callback";
  loss.callback_ = std::move(fn);
  loss.breakpoints_ = std::move(breakpoints);
  loss.K_ = K;
  loss.K_prime_ = K_prime;
  loss.xi_ = xi;
  loss.xi_prime_ = xi_prime;
  if (!loss.xi_ && !loss.breakpoints_.empty()) loss.xi_ = loss.breakpoints_.front();
  if (!loss.xi_prime_ && !loss.breakpoints_.empty()) loss.xi_prime_ = loss.breakpoints_.back();
  return loss;
}

LossSpec LossSpec::mse() {
  auto loss = piecewise_power({{0.0, kInf, {{1.0, 2.0}, {-2.0, 1.0}, {1.0, 0.0}}}},
                              {.K = 0.0, .K_prime = 2.0, .xi = 1.0, .xi_prime = 1.0});
  loss.kind_ = "mse";
  return loss;
}

LossSpec LossSpec::mae() {
  auto loss = piecewise_power({{0.0, 1.0, {{-1.0, 1.0}, {1.0, 0.0}}},
                               {1.0, kInf, {{1.0, 1.0}, {-1.0, 0.0}}}});
  loss.kind_ = "mae";
  return loss;
}

LossSpec LossSpec::interval_confidence(double mu1, double mu2) {
  auto loss = generalized_interval(1.0, 1.0, mu1, mu2);
  loss.kind_ = "interval";
  loss.params_.erase("A1");
  loss.params_.erase("A2");
  return loss;
}

LossSpec LossSpec::generalized_interval(double A1, double A2, double mu1, double mu2) {
  if (!(mu1 > 1.0) || !(mu2 > 1.0) || !std::isfinite(mu1) || !std::isfinite(mu2)) {
    throw DomainError("interval loss: mu1 and mu2 must be finite and > 1");
  }
  if (!(A1 >= 0.0) || !(A2 >= 0.0) || !std::isfinite(A1) || !std::isfinite(A2)) {
    throw DomainError("interval loss: A1 and A2 must be finite and >= 0");
  }
  auto loss = piecewise_power({{0.0, 1.0 / mu2, {{A2, 0.0}}},
                               {1.0 / mu2, mu1, {}},
                               {mu1, kInf, {{A1, 0.0}}}},
                              {.K = 0.0, .K_prime = 0.0, .xi = {}, .xi_prime = {}});
  loss.kind_ = "generalized_interval";
  loss.params_ = {{"A1", A1}, {"A2", A2}, {"mu1", mu1}, {"mu2", mu2}};
  return loss;
}

LossSpec LossSpec::constant(double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("constant loss: c must be finite and >= 0");
  auto loss = piecewise_power({{0.0, kInf, {{c, 0.0}}}}, {.K = 0.0, .K_prime = 0.0, .xi = {}, .xi_prime = {}});
  loss.kind_ = "constant";
  loss.params_ = {{"c", c}};
  return loss;
}

double LossSpec::evaluate(double x) const {
  if (!(x > 0.0)) throw DomainError("loss: x must be > 0, got " + std::to_string(x));
  if (callback_) return callback_(x);
  auto it = std::upper_bound(segments_.begin(), segments_.end(), x,
                             [](double v, const Segment& s) { return v < s.lo; });
  return std::prev(it)->eval(x);
}

double LossSpec::left_limit(double x) const {
  if (!(x > 0.0)) throw DomainError("loss: x must be > 0");
  if (callback_) return callback_(x * (1.0 - 1e-13));
  auto it = std::lower_bound(segments_.begin(), segments_.end(), x,
                             [](const Segment& s, double v) { return s.lo < v; });
  return std::prev(it)->eval(x);
}

double LossSpec::limit_at_zero() const {
  if (callback_) return callback_(1e-200);
  double v = 0.0;
  double most_negative_power = 0.0;
  double sign = 0.0;
  for (const auto& t : segments_.front().terms) {
    if (t.coef == 0.0) continue;
    if (t.power < most_negative_power) {
      most_negative_power = t.power;
      sign = t.coef > 0.0 ? 1.0 : -1.0;
    } else if (t.power == 0.0) {
      v += t.coef;
    }
  }
  if (sign != 0.0) return sign * kInf;
  return v;
}

double LossSpec::sup_bound_below(double x0) const {
  if (!(x0 > 0.0)) throw DomainError("loss: sup bound needs x0 > 0");
  double best = kInf;
  if (xi_ && x0 < *xi_) best = std::max(limit_at_zero(), evaluate(x0));
  if (callback_) return best;
  double bound = -kInf;
  for (const auto& seg : segments_) {
    if (seg.lo >= x0) break;
    const double a = seg.lo;
    const double b = std::min(seg.hi, x0);
    double s = 0.0;
    for (const auto& t : seg.terms) s += std::max(term_at(t, a), term_at(t, b));
    bound = std::max(bound, s);
  }
  return std::min(best, bound);
}

LossSpec LossSpec::scaled(double c) const {
  if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("loss: scale must be finite and >= 0");
  LossSpec out = *this;
  out.params_.clear();
  if (callback_) {
    auto fn = callback_;
    out.callback_ = [fn, c](double x) { return c * fn(x); };
    out.kind_ = "callback";
    return out;
  }
  for (auto& seg : out.segments_) {
    for (auto& t : seg.terms) t.coef *= c;
  }
  out.kind_ = "piecewise_power";
  return out;
}

std::vector<std::pair<double, double>> sample_grid(const LossSpec& loss, double lo, double hi,
                                                   int n) {
  if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) {
    throw DomainError("sample_grid: need 0 < lo < hi < inf");
  }
  if (n < 2) throw DomainError("sample_grid: need n >= 2");
  std::vector<double> xs(n);
  const double step = std::log(hi / lo) / (n - 1);
  for (int i = 0; i < n; ++i) xs[i] = lo * std::exp(step * i);
  xs.front() = lo;
  xs.back() = hi;
  for (double b : loss.breakpoints()) {
    if (b < lo || b > hi) continue;
    auto it = std::find_if(xs.begin(), xs.end(),
                           [b](double x) { return std::fabs(x - b) <= 1e-12 * b; });
    if (it != xs.end()) {
      *it = b;
    } else {
      xs.push_back(b);
    }
  }
  std::sort(xs.begin(), xs.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(xs.size());
  for (double x : xs) out.emplace_back(x, loss(x));
  return out;
}

LossGridReport check_loss_grid(const LossSpec& loss, int points) {
  LossGridReport rep;
  const auto grid = sample_grid(loss, 1e-6, 1e6, std::max(points, 2));
  for (const auto& [x, v] : grid) {
    if (!(v >= 0.0)) {
      rep.nonnegative = false;
      rep.notes.push_back("negative or NaN value at x=" + std::to_string(x));
      break;
    }
  }
  constexpr double slack = 1e-12;
  if (loss.xi()) {
    for (std::size_t i = 1; i < grid.size() && grid[i].first < *loss.xi(); ++i) {
      if (grid[i].second > grid[i - 1].second + slack * std::fabs(grid[i - 1].second)) {
        rep.left_monotone = false;
        rep.notes.push_back("increase below xi at x=" + std::to_string(grid[i].first));
        break;
      }
    }
  }
  if (loss.xi_prime()) {
    for (std::size_t i = 1; i < grid.size(); ++i) {
      if (grid[i - 1].first <= *loss.xi_prime()) continue;
      if (grid[i].second < grid[i - 1].second - slack * std::fabs(grid[i - 1].second)) {
        rep.right_monotone = false;
        rep.notes.push_back("decrease above xi' at x=" + std::to_string(grid[i].first));
        break;
      }
    }
  }
  // |L| / x^K should not grow toward the end of the sampled range
  auto max_ratio = [&](double a, double b, double k) {
    double m = 0.0;
    for (const auto& [x, v] : grid) {
      if (x >= a && x <= b) m = std::max(m, std::fabs(v) / std::pow(x, k));
    }
    return m;
  };
  const double inner0 = max_ratio(1e-6, 1e-5, loss.K());
  const double outer0 = max_ratio(1e-3, 1e-2, loss.K());
  if ((inner0 > 100.0 * outer0 && inner0 > 0.0) || !std::isfinite(inner0)) {
    rep.envelope_zero_bounded = false;
    rep.notes.push_back("L/x^K grows as x -> 0");
  }
  const double inner1 = max_ratio(1e2, 1e3, loss.K_prime());
  const double outer1 = max_ratio(1e5, 1e6, loss.K_prime());
  if ((outer1 > 100.0 * inner1 && outer1 > 0.0) || !std::isfinite(outer1)) {
    rep.envelope_inf_bounded = false;
    rep.notes.push_back("L/x^K' grows as x -> inf");
  }
  return rep;
}

LeftConditionReport left_condition_integral(const LossSpec& loss, int r, double xi) {
  if (r < 1) throw DomainError("left condition: r must be >= 1");
  if (!(xi > 0.0) || !std::isfinite(xi)) throw DomainError("left condition: xi must be > 0");
  LeftConditionReport rep;
  rep.xi_used = xi;
  const double l_xi = loss.left_limit(xi);
  const double head = l_xi * std::pow(xi, -r) / r;
  double tail = 0.0;   // int_xi^inf L(x) x^(-r-1) dx
  double scale = std::fabs(head);
  if (loss.is_piecewise_power()) {
    for (const auto& seg : loss.segments()) {
      if (seg.hi <= xi) continue;
      const double a = std::max(seg.lo, xi);
      const double b = seg.hi;
      for (const auto& t : seg.terms) {
        if (t.coef == 0.0) continue;
        const double e = t.power - r;
        double piece;
        if (std::isinf(b)) {
          if (e >= 0.0) {
            throw DivergenceError("left condition integral diverges: term power " +
                                  std::to_string(t.power) + " >= r");
          }
          piece = -std::pow(a, e) / e;
        } else if (e == 0.0) {
          piece = std::log(b / a);
        } else {
          piece = (std::pow(b, e) - std::pow(a, e)) / e;
        }
        tail += t.coef * piece;
        scale += std::fabs(t.coef * piece);
      }
    }
    rep.abs_error = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  } else {
    if (loss.K_prime() >= r) throw DivergenceError("left condition integral diverges: K' >= r");
    std::vector<double> cuts{xi};
    for (double b : loss.breakpoints()) {
      if (b > xi) cuts.push_back(b);
    }
    QuadratureOptions q;
    q.abs_tol = 1e-14;
    q.rel_tol = 1e-12;
    double err = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      auto res = integrate([&](double x) { return loss(x) * std::pow(x, -r - 1.0); }, cuts[i],
                           cuts[i + 1], q);
      tail += res.value;
      err += res.abs_error;
    }
    // x = 1/t on (cuts.back(), inf)
    auto res = integrate([&](double t) { return loss(1.0 / t) * std::pow(t, r - 1.0); }, 0.0,
                         1.0 / cuts.back(), q);
    tail += res.value;
    err += res.abs_error;
    scale += std::fabs(tail);
    rep.abs_error = err + 64.0 * std::numeric_limits<double>::epsilon() * scale;
  }
  rep.value = head - tail;
  rep.holds = rep.value > std::max(rep.abs_error, 1e-12 * scale);
  return rep;
}

LeftConditionReport check_left_condition(const LossSpec& loss, int r,
                                           std::optional<ZeroLimitHint> hint) {
  if (hint && hint->B * hint->s < 0.0 && hint->s < r) {
    LeftConditionReport rep;
    if (loss.xi()) rep = left_condition_integral(loss, r, *loss.xi());
    rep.holds = true;
    rep.via_limit_condition = true;
    return rep;
  }
  if (!loss.xi()) throw DomainError("left condition: the loss has no xi (left monotonicity bound)");
  const auto first = left_condition_integral(loss, r, *loss.xi());
  if (first.holds) return first;
  double xi = *loss.xi();
  for (int k = 1; k <= 60; ++k) {
    xi *= 0.5;
    auto rep = left_condition_integral(loss, r, xi);
    if (rep.holds) return rep;
  }
  return first;
}

}  // namespace ibsrisk
