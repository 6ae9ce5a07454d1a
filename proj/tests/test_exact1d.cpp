#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "impulse/errors.hpp"
#include "impulse/exact1d.hpp"

using namespace impulse;

namespace {

// Composite Simpson on [a,b]; integrands here are smooth on each piece.
double simpson(const std::function<double(double)>& f, double a, double b, int m = 20000) {
  if (b <= a) return 0.0;
  const double h = (b - a) / (2 * m);
  double s = f(a) + f(b);
  for (int k = 1; k < 2 * m; ++k) s += f(a + k * h) * (k % 2 ? 4 : 2);
  return s * h / 3;
}

// Integral of a function that may jump at x_bar.
double piecewise(const std::function<double(double)>& f, double a, double b, double xb) {
  if (xb <= a || xb >= b) return simpson(f, a, b);
  const double eps = 1e-15;
  return simpson(f, a, xb) + simpson([&](double x) { return f(std::max(x, xb + eps)); }, xb, b);
}

// HJB of the 1-D problem with the jump integral done by quadrature.
double hjb_by_quadrature(double x, const Exact1DSolution& s) {
  const double phi = exact_value(x, s);
  const double inner = x > 0 ? simpson([&](double u) { return exact_value(std::max(u, 1e-300), s); }, 0.0, x) : 0.0;
  const double avg = inner + (1.0 - x) * s.Phi0;
  const double rep = x < 1 ? s.Lambda * std::max(0.0, phi - (s.Phi1 + s.c * (1 - x) + s.d)) : 0.0;
  return s.delta * phi + s.lambda * (phi - avg) + rep - (x == 0 ? 1.0 : 0.0);
}

} // namespace

TEST_CASE("closed-form case reproduces the published quintet and atoms") {
  const Exact1DSolution s = solve_quintet(exact_case_params());
  CHECK(std::abs(s.x_bar - 0.7986) < 5e-5);
  CHECK(std::abs(s.Phi0 - 4.253) < 5e-4);
  CHECK(std::abs(s.Phi_plus0 - 2.435) < 5e-4);
  CHECK(std::abs(s.Phi1 - 1.304) < 5e-4);
  CHECK(std::abs(s.q - 0.138) < 5e-4);
  CHECK(std::abs(s.r - 0.494) < 5e-4);
}

TEST_CASE("bisection residual and endpoint formulas") {
  const ModelParams p = exact_case_params();
  const double xb = solve_threshold(p);
  CHECK(std::abs(threshold_lhs(xb, p) - threshold_rhs(xb, p)) < 1e-13);
  const double beta = p.lambda / (p.delta + p.lambda);
  CHECK(threshold_lhs(0.0, p) ==
        doctest::Approx((p.c + p.d) * std::exp(-beta) / (1 - std::exp(-beta))).epsilon(1e-14));
  CHECK(threshold_rhs(0.0, p) == doctest::Approx(1.0 / (p.delta + p.lambda + p.Lambda)).epsilon(1e-14));
}

TEST_CASE("quintet satisfies all four relations") {
  for (double lam : {0.20, 0.10, 0.35}) {
    ModelParams p = exact_case_params();
    p.lambda = lam;
    const Exact1DSolution s = solve_quintet(p);
    for (double r : quintet_residuals(s)) CHECK(std::abs(r) < 1e-10);
    CHECK(std::abs((p.delta + p.Lambda) * s.Phi0 - p.Lambda * (s.Phi1 + p.c + p.d) - 1) < 1e-12);
    CHECK(s.Phi0 > s.Phi_plus0);
  }
}

TEST_CASE("no bracket when fixed costs dominate") {
  ModelParams p = exact_case_params();
  p.d = 50.0;
  CHECK_THROWS_AS(solve_threshold(p), NoBracket);
  p = exact_case_params();
  p.levy.kind = LevyKind::TruncExp;
  p.levy.theta = 5;
  CHECK_THROWS_AS(solve_quintet(p), ConfigError);
}

TEST_CASE("value function shape") {
  const Exact1DSolution s = solve_quintet(exact_case_params());
  CHECK(exact_value(0.0, s) == s.Phi0);
  CHECK(exact_value(1.0, s) == doctest::Approx(s.Phi1).epsilon(1e-14));
  CHECK(exact_value(1e-14, s) == doctest::Approx(s.Phi_plus0).epsilon(1e-12));
  const double left = exact_value(s.x_bar, s);
  const double right = exact_value(std::nextafter(s.x_bar, 1.0), s);
  CHECK(std::abs(left - right) < 1e-10);
  for (int k = 0; k <= 1000; ++k) {
    const double v = exact_value(k / 1000.0, s);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 / s.delta);
  }
}

TEST_CASE("HJB residual: closed form vs quadrature") {
  const Exact1DSolution s = solve_quintet(exact_case_params());
  std::vector<double> xs;
  for (int k = 0; k <= 1000; ++k) xs.push_back(k / 1000.0);
  CHECK(residual_hjb_1d(s, xs) < 1e-9);
  for (double x : {0.0, 0.05, 0.3, 0.79, 0.81, 0.95, 1.0}) CHECK(std::abs(hjb_by_quadrature(x, s)) < 1e-9);

  Exact1DSolution bad = s;
  bad.Phi0 += 0.01;
  CHECK(std::abs(hjb_residual_1d(0.0, bad)) >= s.delta * 0.01);
}

TEST_CASE("stationary density balances by quadrature") {
  const Exact1DSolution s = solve_quintet(exact_case_params());
  const double xb = s.x_bar;
  auto p = [&](double x) { return exact_density(x, s); };
  const double interior = piecewise(p, 0.0, 1.0, xb);
  CHECK(s.q + s.r + interior == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact_density_integral(0, 1, s) == doctest::Approx(interior).epsilon(1e-12));
  CHECK(s.q > 0);
  CHECK(s.r > 0);

  // x = 0 atom: observation outflow equals jump inflow past the boundary
  const double to_zero = piecewise([&](double x) { return p(x) * (1 - x); }, 0.0, 1.0, xb);
  CHECK(s.Lambda * s.q == doctest::Approx(s.lambda * to_zero).epsilon(1e-10));
  // x = 1 atom: jumps out equal replenishments in
  const double replenished = s.q + piecewise(p, 0.0, xb, xb + 1);
  CHECK(s.lambda * s.r == doctest::Approx(s.Lambda * replenished).epsilon(1e-10));
  // interior points
  for (double x : {0.1, 0.5, 0.79, 0.85, 0.99}) {
    const double above = piecewise(p, x, 1.0, xb);
    const double out = (s.lambda + (x <= xb ? s.Lambda : 0.0)) * p(x);
    CHECK(out == doctest::Approx(s.lambda * (above + s.r)).epsilon(1e-9));
  }
  // jump at the threshold has ratio alpha
  const double l = exact_density(xb, s), r = exact_density(std::nextafter(xb, 1.0), s);
  CHECK(l == doctest::Approx(s.alpha * s.r * std::exp(1 - xb)).epsilon(1e-12));
  CHECK(r == doctest::Approx(s.r * std::exp(1 - xb)).epsilon(1e-12));
  CHECK(l / r == doctest::Approx(s.alpha).epsilon(1e-12));
}

TEST_CASE("atoms at the zero-threshold limit and positivity") {
  const ModelParams p = exact_case_params();
  Exact1DSolution s = quintet_for_threshold(0.0, p);
  fill_atoms(s);
  const double u = p.lambda / p.Lambda;
  CHECK(s.r == doctest::Approx(1 / (u + std::exp(1.0))));
  CHECK(s.q == doctest::Approx(s.r * u));
  CHECK(s.q + s.r + exact_density_integral(0, 1, s) == doctest::Approx(1.0).epsilon(1e-12));

  for (double xb = 0; xb <= 1.0; xb += 0.01) {
    const double F = u + std::exp(1 - xb) - std::exp((1 - xb) / (1 + u));
    CHECK(F > 0);
    if (xb < 0.995) {
      Exact1DSolution t = quintet_for_threshold(xb, p);
      fill_atoms(t);
      CHECK(t.q > 0);
      CHECK(t.q + t.r + exact_density_integral(0, 1, t) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  Exact1DSolution t = quintet_for_threshold(1.0, p);
  CHECK_THROWS_AS(fill_atoms(t), InvalidThreshold);
}
