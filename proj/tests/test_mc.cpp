#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "impulse/errors.hpp"
#include "impulse/exact1d.hpp"
#include "impulse/mc.hpp"

using namespace impulse;

TEST_CASE("frozen dynamics") {
  ModelParams p = exact_case_params();
  p.lambda = 1e-300;
  p.Lambda = 1e-300;
  Philox rng(1, 0);
  const PathState s = simulate_path(0.5, 0.0, 1000.0, 0.02, p, ThresholdPolicy::constant(0.9), rng);
  CHECK(s.x == 0.5);
  CHECK(s.y == 0.0);
  CHECK(s.jumps == 0);
  CHECK(s.observations == 0);
  CHECK(s.objective() == 0.0);
}

TEST_CASE("extinct population stays extinct") {
  const ModelParams p = application_params(50.0);
  const ThresholdPolicy pol = ThresholdPolicy::rows(std::vector<double>(11, 0.3), true);
  for (int k = 0; k < 200; ++k) {
    Philox rng(9, k);
    const PathState s = simulate_path(1.0, 0.0, 500.0, 0.01, p, pol, rng);
    CHECK(s.y == 0.0);
    CHECK(s.jumps > 0);
  }
}

TEST_CASE("single replenishment trace") {
  ModelParams p = exact_case_params();
  p.lambda = 1e-300; // no jumps
  const ThresholdPolicy pol = ThresholdPolicy::constant(0.999);
  Philox rng(3, 0);
  const PathState s = simulate_path(0.4, 0.0, 400.0, 0.02, p, pol, rng);
  CHECK(s.replenishments == 1);
  CHECK(s.x == 1.0);
  CHECK(s.observations > 1);
  const double charge = p.c * 0.6 + p.d;
  CHECK(s.cost <= charge);
  CHECK(s.cost > 0.0);
  // recover the observation time and check the discount exactly
  const double t = -std::log(s.cost / charge) / p.delta;
  CHECK(std::abs(t / 0.02 - std::round(t / 0.02)) < 1e-6);
  CHECK(s.depletion == 0.0);
}

TEST_CASE("state stays in the unit square") {
  const ModelParams p = application_params(50.0);
  const ThresholdPolicy pol = ThresholdPolicy::rows(std::vector<double>(21, 0.2), true);
  Philox rng(5, 1);
  const PathState s = simulate_path(0.7, 0.5, 10000.0, 0.01, p, pol, rng); // 1e6 steps
  CHECK((s.x >= 0.0 && s.x <= 1.0));
  CHECK((s.y >= 0.0 && s.y <= 1.0));
  McOptions o;
  o.paths = 2000;
  o.window = 20;
  const McDensity d = estimate_density(p, pol, 20, true, o);
  CHECK(d.field.mass() == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : d.field.p) CHECK(v >= 0.0);
}

TEST_CASE("jump sizes follow the jump law (KS at 1%)") {
  for (const ModelParams& p : {exact_case_params(), application_params(50.0)}) {
    const int N = 100000;
    Philox rng(11, 0);
    std::vector<double> z(N);
    for (double& v : z) v = levy_quantile(rng.uniform(), p);
    std::sort(z.begin(), z.end());
    double D = 0;
    for (int k = 0; k < N; ++k) {
      const double F = levy_cdf(z[k], p);
      D = std::max({D, F - double(k) / N, double(k + 1) / N - F});
    }
    CHECK(D < 1.63 / std::sqrt(double(N)));
  }
}

TEST_CASE("1-D density atoms and reproducibility") {
  const ModelParams p = exact_case_params();
  const Exact1DSolution s = solve_quintet(p);
  McOptions o;
  o.paths = 200000;
  o.window = 0;
  const ThresholdPolicy pol = ThresholdPolicy::constant(s.x_bar);
  const McDensity d = estimate_density(p, pol, 50, false, o);
  CHECK(d.field.mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(d.field.q[0] - s.q) < 0.005);
  CHECK(std::abs(d.field.r[0] - s.r) < 0.005);
  CHECK(d.burn_in == doctest::Approx(20.0 / 0.1));

  McOptions one = o, many = o;
  one.paths = many.paths = 20000;
  one.workers = 1;
  many.workers = 4;
  const McDensity a = estimate_density(p, pol, 50, false, one);
  const McDensity b = estimate_density(p, pol, 50, false, many);
  CHECK(a.field.p == b.field.p);
  CHECK(a.field.q == b.field.q);
}

TEST_CASE("objective matches the closed-form value") {
  const ModelParams p = exact_case_params();
  const Exact1DSolution s = solve_quintet(p);
  const ThresholdPolicy pol = ThresholdPolicy::constant(s.x_bar);
  McOptions o;
  o.paths = 200000;
  o.dt = 0.002;
  const McObjective at1 = estimate_objective(1.0, 0.0, p, pol, o);
  CHECK(std::abs(at1.mean - s.Phi1) < 3 * at1.stderr_);
  CHECK(at1.bias_bound <= 1e-10 * 1.0001);
  const McObjective at0 = estimate_objective(0.0, 0.0, p, pol, o);
  CHECK(std::abs(at0.mean - s.Phi0) < 3 * at0.stderr_);

}

TEST_CASE("perturbed thresholds are worse (paired paths)") {
  const ModelParams p = exact_case_params();
  const Exact1DSolution s = solve_quintet(p);
  const double horizon = std::log((1.0 + disutility(1.0, p)) / p.delta / 1e-10) / p.delta;
  for (double shift : {-0.15, 0.15}) {
    const int N = 40000;
    double s1 = 0, s2 = 0;
    for (int k = 0; k < N; ++k) {
      Philox ra(21, k), rb(21, k);
      const double a = simulate_path(1.0, 0.0, horizon, 0.005, p, ThresholdPolicy::constant(s.x_bar), ra).objective();
      const double b = simulate_path(1.0, 0.0, horizon, 0.005, p, ThresholdPolicy::constant(s.x_bar + shift), rb).objective();
      s1 += b - a;
      s2 += (b - a) * (b - a);
    }
    const double mean = s1 / N, se = std::sqrt((s2 / N - mean * mean) / (N - 1));
    CHECK(mean > 3 * se);
  }
}

TEST_CASE("null policy without jumps costs nothing") {
  ModelParams p = exact_case_params();
  p.lambda = 1e-300;
  McOptions o;
  o.paths = 1000;
  const McObjective v = estimate_objective(0.6, 0.0, p, ThresholdPolicy::constant(-1.0), o);
  CHECK(v.mean == 0.0);
  CHECK(v.stderr_ == 0.0);
}

TEST_CASE("policy rows") {
  const ThresholdPolicy pol = ThresholdPolicy::rows({0.1, 0.2, 0.3, 0.4, 0.5}, true);
  CHECK(pol.at(0.0) == 0.1);
  CHECK(pol.at(0.2) == 0.2);
  CHECK(pol.at(0.25) == 0.2);
  CHECK(pol.at(0.26) == 0.3);
  CHECK(pol.at(1.0) == 0.5);
  CHECK_THROWS_AS(ThresholdPolicy::rows({}, false), ConfigError);
  Philox rng(0, 0);
  CHECK_THROWS_AS(simulate_path(1.5, 0.0, 1.0, 0.01, exact_case_params(), pol, rng), DomainError);
}
