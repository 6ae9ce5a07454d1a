#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "impulse/errors.hpp"
#include "impulse/jumpgrid.hpp"

using namespace impulse;

namespace {
GridSpec grid(int n, int L, bool two_d = false) {
  GridSpec g;
  g.n = n;
  g.L = L;
  g.rho = 1.0 / n;
  g.dt = 1.0 / n;
  g.two_d = two_d;
  return g;
}
} // namespace

TEST_CASE("bin masses and midpoints") {
  const ModelParams p = exact_case_params();
  const JumpGrid g = build_jump_grid(grid(10, 4), p);
  REQUIRE(g.nu.size() == 4);
  for (double v : g.nu) CHECK(v == doctest::Approx(0.05).epsilon(1e-14));
  for (int l = 0; l < 4; ++l) CHECK(g.z[l] == (l + 0.5) / 4);

  const ModelParams t = application_params(50.0);
  for (int L : {1, 7, 100, 400}) {
    const JumpGrid h = build_jump_grid(grid(20, L), t);
    double s = 0;
    for (double v : h.nu) s += v;
    CHECK(s == doctest::Approx(effective_intensity(t)).epsilon(1e-12));
    CHECK(h.lambda_eff == effective_intensity(t));
    for (int l = 0; l < L; ++l) CHECK(h.z[l] == doctest::Approx(0.25 * (l + 0.5) / L).epsilon(1e-15));
  }
}

TEST_CASE("HJB x index") {
  const ModelParams p = exact_case_params();
  const JumpGrid g = build_jump_grid(grid(200, 5), p); // z_0 = 0.1
  CHECK(g.z[0] == doctest::Approx(0.1));
  CHECK(g.a_at(100, 0) == 80);
  CHECK(g.post_jump_vertex(100, 0) == 81);
  // x = 0.1 overshoots with z = 0.5: depletion
  const JumpGrid k = build_jump_grid(grid(10, 1), p); // z_0 = 0.5
  CHECK(k.a_at(1, 0) == -1);
  CHECK(k.post_jump_vertex(1, 0) == 0);
  // depleted vertex stays depleted
  for (int l = 0; l < g.L; ++l) CHECK(g.post_jump_vertex(0, l) == 0);
}

TEST_CASE("FP partition of unity and ranges") {
  for (const ModelParams& p : {exact_case_params(), application_params(50.0)}) {
    for (int n : {10, 37, 64}) {
      const JumpGrid g = build_jump_grid(grid(n, 2 * n, true), p);
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < g.L; ++l) {
          int hits = g.alpha_at(i, l) < 0 ? 1 : 0;
          for (int t = 1; t <= n; ++t) hits += g.alpha_at(i, l) == t - 1;
          CHECK(hits == 1);
          CHECK(g.alpha_at(i, l) <= i); // jumps only decrease x
        }
      for (int l = 0; l < g.L; ++l) CHECK((g.gamma[l] >= -1 && g.gamma[l] <= n - 1));
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
          for (int l = 0; l < g.L; ++l) {
            int hits = 0;
            for (int t = 1; t <= n; ++t) hits += g.beta_at(i, j, l) == t - 1;
            CHECK(hits == 1);
            CHECK(g.beta_at(i, j, l) <= j); // detachment only lowers y
          }
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < g.L; ++l) CHECK((g.omega_at(j, l) >= 0 && g.omega_at(j, l) <= j));
      for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
          for (int l = 0; l < g.L; ++l) CHECK((g.b_at(i, j, l) >= 0 && g.b_at(i, j, l) <= j));
    }
  }
}

TEST_CASE("FP indices against direct evaluation") {
  const ModelParams p = application_params(50.0);
  const int n = 40;
  const JumpGrid g = build_jump_grid(grid(n, 80, true), p);
  const double h = 1.0 / n;
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < g.L; ++l) {
      const double xc = (i + 0.5) * h - g.z[l];
      if (xc < 0) CHECK(g.alpha_at(i, l) == -1);
      else CHECK(g.alpha_at(i, l) == static_cast<int>(xc / h));
      for (int j = 0; j < n; j += 7) {
        const double yc = (j + 0.5) * h * std::exp(-p.xi * std::min((i + 0.5) * h, g.z[l]));
        CHECK(g.beta_at(i, j, l) == std::min(static_cast<int>(yc / h), n - 1));
      }
    }
}

TEST_CASE("1-D grids carry no y tables") {
  const JumpGrid g = build_jump_grid(grid(20, 40), exact_case_params());
  CHECK(g.b.empty());
  CHECK(g.beta.empty());
  CHECK(g.omega.empty());
  CHECK(g.b_at(3, 0, 5) == 0);
}

TEST_CASE("replenish cell count") {
  CHECK(replenish_cell_count(-1.0, 50) == 0);
  CHECK(replenish_cell_count(0.7986, 50) == 39);
  const int k = replenish_cell_count(std::nextafter(1.0, 0.0), 50);
  CHECK((k == 49 || k == 50));
  for (int m = 0; m <= 100; ++m) {
    const double x = m / 100.0;
    CHECK(std::abs(replenish_cell_count(x, 37) / 37.0 - x) <= 1.0 / 37);
  }
}

TEST_CASE("grid validation") {
  GridSpec g = grid(1, 4);
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = grid(10, 0);
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = grid(10, 4);
  g.rho = 0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  ModelParams p = exact_case_params();
  p.z_hi = 0.0;
  CHECK_THROWS_AS(build_jump_grid(grid(10, 4), p), ConfigError);
  CHECK(rho_preset("sec41", 100) == doctest::Approx(0.01));
  CHECK(rho_preset("sec31", 100) == doctest::Approx(1e-3));
  CHECK(rho_preset("sec42", 100) == doctest::Approx(0.01));
  CHECK_THROWS_AS(rho_preset("bogus", 100), ConfigError);
}
