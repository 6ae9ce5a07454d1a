#include "impulse/jumpgrid.hpp"

#include <algorithm>
#include <cmath>

#include "impulse/errors.hpp"

namespace impulse {

namespace {

// Floors that land within roundoff below an integer are snapped up.
constexpr double kSnap = 1e-9;

int snapped_floor(double s) { return static_cast<int>(std::floor(s + kSnap)); }

} // namespace

void GridSpec::validate() const {
  if (n < 2) throw ConfigError("n must be >= 2");
  if (L < 1) throw ConfigError("L must be >= 1");
  if (!(rho > 0)) throw ConfigError("rho must be > 0");
  if (!(dt > 0)) throw ConfigError("dt must be > 0");
}

double rho_preset(const std::string& name, int n) {
  const double h = 1.0 / n;
  if (name == "sec31") return std::pow(h, 1.5);
  if (name == "sec41") return h;
  if (name == "sec42") return 10.0 * std::pow(static_cast<double>(n), -1.5);
  throw ConfigError("unknown rho preset: " + name);
}

JumpGrid build_jump_grid(const GridSpec& spec, const ModelParams& params) {
  spec.validate();
  if (!(params.z_hi > params.z_lo)) throw ConfigError("jump support needs z_hi > z_lo");

  JumpGrid g;
  g.n = spec.n;
  g.L = spec.L;
  g.two_d = spec.two_d;
  const int n = spec.n, L = spec.L;
  const double width = (params.z_hi - params.z_lo) / L;

  g.z.resize(L);
  g.nu.resize(L);
  for (int l = 0; l < L; ++l) {
    const double lo = params.z_lo + width * l;
    const double hi = (l + 1 == L) ? params.z_hi : params.z_lo + width * (l + 1);
    g.z[l] = params.z_lo + (params.z_hi - params.z_lo) * (l + 0.5) / L;
    g.nu[l] = levy_mass(lo, hi, params);
  }
  g.lambda_eff = effective_intensity(params);

  g.a.resize(static_cast<std::size_t>(n + 1) * L);
  for (int i = 0; i <= n; ++i)
    for (int l = 0; l < L; ++l) {
      const double s = i - n * g.z[l];
      g.a[static_cast<std::size_t>(i) * L + l] = s < -kSnap ? -1 : std::min(snapped_floor(s), n);
    }

  g.alpha.resize(static_cast<std::size_t>(n) * L);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < L; ++l) {
      const double s = i + 0.5 - n * g.z[l];
      g.alpha[static_cast<std::size_t>(i) * L + l] = s < -kSnap ? -1 : std::min(snapped_floor(s), n - 1);
    }

  g.gamma.resize(L);
  for (int l = 0; l < L; ++l) {
    const double s = n * (1.0 - g.z[l]);
    g.gamma[l] = s < -kSnap ? -1 : std::min(snapped_floor(s), n - 1);
  }

  if (spec.two_d) {
    const int rows = n + 1;
    g.b.resize(static_cast<std::size_t>(rows) * (n + 1) * L);
    for (int j = 0; j < rows; ++j)
      for (int i = 0; i <= n; ++i)
        for (int l = 0; l < L; ++l) {
          const double gf = detachment_factor(i * spec.h(), g.z[l], params);
          g.b[(static_cast<std::size_t>(j) * (n + 1) + i) * L + l] =
              std::clamp(snapped_floor(j * gf + 0.5), 0, n);
        }
    g.beta.resize(static_cast<std::size_t>(n) * n * L);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < L; ++l) {
          const double gf = detachment_factor((i + 0.5) * spec.h(), g.z[l], params);
          g.beta[(static_cast<std::size_t>(j) * n + i) * L + l] =
              std::clamp(snapped_floor((j + 0.5) * gf), 0, n - 1);
        }
    g.omega.resize(static_cast<std::size_t>(n) * L);
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < L; ++l) {
        const double gf = detachment_factor(1.0, g.z[l], params);
        g.omega[static_cast<std::size_t>(j) * L + l] = std::clamp(snapped_floor((j + 0.5) * gf), 0, n - 1);
      }
  }
  return g;
}

int replenish_cell_count(double x_bar, int n) {
  if (x_bar < 0) return 0;
  return std::clamp(static_cast<int>(std::floor(x_bar * n)), 0, n);
}

} // namespace impulse
