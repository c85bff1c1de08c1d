#include <doctest.h>

#include <cmath>

#include "ibsrisk/quadrature.hpp"

using namespace ibsrisk;

TEST_CASE("one Kronrod panel is exact for polynomials up to degree 31") {
  for (int d = 0; d <= 31; ++d) {
    auto f = [d](double x) { return std::pow(x, d); };
    const auto res = detail::gk21(f, -0.5, 1.5);
    const double exact = (std::pow(1.5, d + 1) - std::pow(-0.5, d + 1)) / (d + 1);
    CAPTURE(d);
    CHECK(std::fabs(res.value - exact) <= 1e-14 * std::max(1.0, std::fabs(exact)));
  }
}

TEST_CASE("adaptive integration of smooth and singular integrands") {
  auto r1 = integrate([](double x) { return std::exp(-x) * std::cos(5 * x); }, 0.0, 20.0);
  const double e1 = (1 - std::exp(-20.0) * (std::cos(100.0) - 5 * std::sin(100.0))) / 26.0;
  CHECK(r1.converged);
  CHECK(std::fabs(r1.value - e1) <= 1e-13);
  CHECK(r1.abs_error <= 1e-12);

  // integrable endpoint singularity
  auto r2 = integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 4.0);
  CHECK(std::fabs(r2.value - 4.0) <= 1e-9);

  // jump inside the interval
  auto r3 = integrate([](double x) { return x < 0.3 ? 1.0 : 2.0; }, 0.0, 1.0);
  CHECK(std::fabs(r3.value - 1.7) <= 1e-11);

  // reversed limits flip the sign
  auto r4 = integrate([](double x) { return x * x; }, 2.0, 0.0);
  CHECK(r4.value == doctest::Approx(-8.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("the subdivision cap is reported") {
  QuadratureOptions q;
  q.max_subdivisions = 3;
  q.abs_tol = 1e-15;
  q.rel_tol = 1e-15;
  auto r = integrate([](double x) { return std::sin(1.0 / x); }, 1e-3, 1.0, q);
  CHECK_FALSE(r.converged);
  CHECK(r.subdivisions == 3);
}
