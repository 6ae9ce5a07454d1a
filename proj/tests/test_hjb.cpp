#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "impulse/errors.hpp"
#include "impulse/exact1d.hpp"
#include "impulse/hjb.hpp"

using namespace impulse;

namespace {

GridSpec grid(int n, bool two_d = false, int L = 0) {
  GridSpec g;
  g.n = n;
  g.L = L > 0 ? L : 2 * n;
  g.rho = two_d ? rho_preset("sec42", n) : rho_preset("sec41", n);
  g.dt = 1.0 / n;
  g.two_d = two_d;
  return g;
}

double linf_vs_exact(const ValueField& f, const Exact1DSolution& s) {
  double e = 0;
  for (int i = 0; i <= f.n; ++i) e = std::max(e, std::abs(f.at(i, 0) - exact_value(double(i) / f.n, s)));
  return e;
}

// One sweep of the fixed-point map assembled from the public operators.
ValueField sweep(const ValueField& f, const GridSpec& spec, const JumpGrid& g, const ModelParams& p) {
  const double E = std::exp(-p.delta * spec.rho), eps = (1 - E) / p.delta;
  const ValueField adv = semi_lagrangian_advect(f, spec.rho, p);
  ValueField out = f;
  for (int j = 0; j < f.rows(); ++j)
    for (int i = 0; i <= f.n; ++i) {
      const double y = f.two_d ? double(j) / f.n : 0.0;
      const double src = (i == 0 ? 1.0 : 0.0) + (f.two_d ? disutility(y, p) : 0.0);
      out.at(i, j) = E * adv.at(i, j) + eps * (nonlocal_jump(f, g, i, j) - replenish_operator(f, i, j, p).first + src);
    }
  return out;
}

} // namespace

TEST_CASE("jump operator") {
  const ModelParams p = exact_case_params();
  const GridSpec spec = grid(50);
  const JumpGrid g = build_jump_grid(spec, p);
  ValueField f = make_value_field(50, false, 3.7);
  for (int i = 0; i <= 50; ++i) CHECK(std::abs(nonlocal_jump(f, g, i, 0)) < 1e-14);

  // depleted vertex only sees itself
  for (int i = 0; i <= 50; ++i) f.at(i, 0) = 1.0 + i;
  CHECK(std::abs(nonlocal_jump(f, g, 0, 0)) < 1e-14);

  // smooth data: the sum approximates lambda (int Phi((x-z)^+) dz - Phi(x)) to O(h)
  for (int i = 0; i <= 50; ++i) f.at(i, 0) = std::pow(double(i) / 50, 2);
  for (int i : {10, 25, 40, 50}) {
    const double x = i / 50.0;
    const double exact = p.lambda * (x * x * x / 3 - x * x);
    CHECK(std::abs(nonlocal_jump(f, g, i, 0) - exact) < 2.0 * p.lambda / 50);
  }
}

TEST_CASE("replenish operator") {
  const ModelParams p = exact_case_params();
  ValueField f = make_value_field(10, false, 0.0);
  f.at(10, 0) = 1.0;
  auto [v, eta] = replenish_operator(f, 10, 0, p);
  CHECK(v == 0.0);
  CHECK(eta == 0.0);
  f.at(3, 0) = 100.0;
  std::tie(v, eta) = replenish_operator(f, 3, 0, p);
  CHECK(eta == doctest::Approx(0.7));
  CHECK(v == doctest::Approx(p.Lambda * (100.0 - (1.0 + p.c * 0.7 + p.d))));
  // exact tie keeps eta = 0
  f.at(3, 0) = 1.0 + p.c * (1.0 - 0.3) + p.d;
  std::tie(v, eta) = replenish_operator(f, 3, 0, p);
  CHECK(eta == 0.0);
  CHECK(v == 0.0);
}

TEST_CASE("semi-Lagrangian advection") {
  ModelParams p = application_params(50.0);
  ValueField f = make_value_field(20, true, 0.0);
  for (int j = 0; j <= 20; ++j)
    for (int i = 0; i <= 20; ++i) f.at(i, j) = std::sin(3.0 * i / 20) + std::cos(5.0 * j / 20);

  // boundary rows are fixed points of the drift
  const ValueField a = semi_lagrangian_advect(f, 0.05, p);
  for (int i = 0; i <= 20; ++i) {
    CHECK(a.at(i, 0) == f.at(i, 0));
    CHECK(a.at(i, 20) == f.at(i, 20));
  }
  p.G = 0.0;
  const ValueField b = semi_lagrangian_advect(f, 0.05, p);
  CHECK(b.Phi == f.Phi);

  // affine data is reproduced by the linear mode
  p.G = 0.4;
  ValueField lin = make_value_field(10, true, 0.0);
  for (int j = 0; j <= 10; ++j)
    for (int i = 0; i <= 10; ++i) lin.at(i, j) = j / 10.0;
  const ValueField c = semi_lagrangian_advect(lin, 0.01, p, Interp::Linear);
  CHECK(c.at(4, 5) == doctest::Approx(0.501).epsilon(1e-14));
  // and quadratics by the WENO mode (both candidate stencils are exact)
  for (int j = 0; j <= 10; ++j)
    for (int i = 0; i <= 10; ++i) lin.at(i, j) = std::pow(j / 10.0, 2);
  const ValueField d = semi_lagrangian_advect(lin, 0.01, p, Interp::Weno);
  for (int j = 0; j <= 10; ++j) {
    const double y = j / 10.0, foot = y + 0.4 * y * (1 - y) * 0.01;
    CHECK(d.at(2, j) == doctest::Approx(foot * foot).epsilon(1e-12));
  }
}

TEST_CASE("1-D value iteration matches the closed form") {
  const ModelParams p = exact_case_params();
  const Exact1DSolution s = solve_quintet(p);
  const double table[3] = {1.680e-2, 8.370e-3, 4.180e-3};
  const double xb[3] = {0.8100, 0.7950, 0.7975};
  int k = 0;
  for (int n : {50, 100, 200}) {
    const GridSpec spec = grid(n);
    const ValueField f = value_iteration(spec, build_jump_grid(spec, p), p);
    CHECK(linf_vs_exact(f, s) == doctest::Approx(table[k]).epsilon(0.10));
    CHECK(f.x_bar[0] == doctest::Approx(xb[k]).epsilon(1e-12));
    CHECK(std::abs(f.x_bar[0] - s.x_bar) <= 1.0 / n);
    CHECK(f.final_residual < 1e-12);
    CHECK(f.all_threshold());
    CHECK(f.eta[n] == 0.0);
    CHECK(f.eta[0] > 0.0);
    for (double v : f.Phi) CHECK((v >= 0.0 && v <= 1.0 / p.delta));
    ++k;
  }
}

TEST_CASE("returned field is a fixed point of one plain sweep") {
  const ModelParams p = exact_case_params();
  const GridSpec spec = grid(50);
  const JumpGrid g = build_jump_grid(spec, p);
  const ValueField f = value_iteration(spec, g, p);
  const ValueField s = sweep(f, spec, g, p);
  for (std::size_t k = 0; k < f.Phi.size(); ++k) CHECK(std::abs(s.Phi[k] - f.Phi[k]) < 1e-12);

  HjbOptions plain;
  plain.accelerate = false;
  const ValueField q = value_iteration(spec, g, p, plain);
  for (std::size_t k = 0; k < f.Phi.size(); ++k) CHECK(std::abs(q.Phi[k] - f.Phi[k]) < 1e-9);
  CHECK(q.x_bar == f.x_bar);
}

TEST_CASE("bound is preserved by one sweep from the upper constant") {
  for (ModelParams p : {exact_case_params(), application_params(50.0)}) {
    const bool two_d = p.G > 0;
    if (!two_d) p.source = SourceSpec{};
    const GridSpec spec = grid(20, two_d);
    const JumpGrid g = build_jump_grid(spec, p);
    const double top = (1.0 + disutility(1.0, p)) / p.delta;
    const ValueField s = sweep(make_value_field(20, two_d, top), spec, g, p);
    for (double v : s.Phi) CHECK((v >= 0.0 && v <= top + 1e-12));
  }
}

TEST_CASE("almost no jumps: interior value vanishes") {
  ModelParams p = exact_case_params();
  p.lambda = 1e-12;
  const GridSpec spec = grid(20);
  const ValueField f = value_iteration(spec, build_jump_grid(spec, p), p);
  for (int i = 1; i <= 20; ++i) CHECK(std::abs(f.at(i, 0)) <= 1e-8);
  CHECK(f.at(0, 0) > 1.0);
}

TEST_CASE("2-D with no growth and no disutility reduces to 1-D row-wise") {
  ModelParams p = application_params(50.0);
  p.G = 0.0;
  p.source = SourceSpec{};
  GridSpec s1 = grid(40), s2 = grid(40, true);
  s2.rho = s1.rho;
  const ValueField a = value_iteration(s1, build_jump_grid(s1, p), p);
  const ValueField b = value_iteration(s2, build_jump_grid(s2, p), p);
  double worst = 0;
  for (int j = 0; j <= 40; ++j)
    for (int i = 0; i <= 40; ++i) worst = std::max(worst, std::abs(b.at(i, j) - a.at(i, 0)));
  CHECK(worst < 1e-10);
  for (int j = 0; j <= 40; ++j) CHECK(b.x_bar[j] == a.x_bar[0]);
}

TEST_CASE("application policy is threshold type") {
  const ModelParams p = application_params(50.0);
  const GridSpec spec = grid(40, true);
  const ValueField f = value_iteration(spec, build_jump_grid(spec, p), p);
  CHECK(f.all_threshold());
  const double top = (1.0 + disutility(1.0, p)) / p.delta;
  for (double v : f.Phi) CHECK((v >= 0.0 && v <= top));
  for (int j = 0; j <= 40; ++j) CHECK(f.eta[static_cast<std::size_t>(j) * 41 + 40] == 0.0);
}

TEST_CASE("threshold detection") {
  ValueField f = make_value_field(10, false, 0.0);
  CHECK(detect_threshold(f)[0] == -1.0);
  CHECK(f.all_threshold());
  for (int i = 0; i <= 3; ++i) f.eta[i] = 1.0 - i / 10.0;
  CHECK(detect_threshold(f)[0] == doctest::Approx(0.35));
  f.eta[7] = 0.3;
  detect_threshold(f);
  CHECK_FALSE(f.all_threshold());
}

TEST_CASE("iteration cap") {
  const ModelParams p = exact_case_params();
  const GridSpec spec = grid(20);
  HjbOptions o;
  o.max_iter = 3;
  CHECK_THROWS_AS(value_iteration(spec, build_jump_grid(spec, p), p, o), MaxIterations);
  const JumpGrid other = build_jump_grid(grid(30), p);
  CHECK_THROWS_AS(value_iteration(spec, other, p), GridMismatch);
}
