#include "impulse/exact1d.hpp"

#include <algorithm>
#include <cmath>

#include "impulse/errors.hpp"

namespace impulse {

namespace {

void require_uniform(const ModelParams& p) {
  if (p.levy.kind != LevyKind::Uniform || p.z_lo != 0.0 || p.z_hi != 1.0)
    throw ConfigError("exact 1-D solution needs the uniform jump law on (0,1)");
}

struct Rates {
  double beta, gamma, alpha;
};

Rates rates(const ModelParams& p) {
  return {p.lambda / (p.delta + p.lambda), p.lambda / (p.delta + p.lambda + p.Lambda),
          p.lambda / (p.lambda + p.Lambda)};
}

} // namespace

double threshold_lhs(double xb, const ModelParams& p) {
  const double e = std::exp(-rates(p).beta * (1.0 - xb));
  return (p.c + p.d - p.c * xb) * e / (1.0 - e);
}

double threshold_rhs(double xb, const ModelParams& p) {
  const double k = p.Lambda * p.c / p.lambda;
  return (1.0 / (p.delta + p.lambda + p.Lambda) + k) * std::exp(rates(p).gamma * xb) - k;
}

double solve_threshold(const ModelParams& p) {
  require_uniform(p);
  auto f = [&](double x) { return threshold_lhs(x, p) - threshold_rhs(x, p); };
  double lo = 1e-9, hi = 1.0 - 1e-9;
  double flo = f(lo);
  const double fhi = f(hi);
  if (!(flo < 0 && fhi > 0) && !(flo > 0 && fhi < 0))
    throw NoBracket("threshold equation has no sign change on (0,1); uniqueness assumption fails");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Exact1DSolution quintet_for_threshold(double xb, const ModelParams& p) {
  Exact1DSolution s;
  const Rates k = rates(p);
  s.beta = k.beta;
  s.gamma = k.gamma;
  s.alpha = k.alpha;
  s.delta = p.delta;
  s.Lambda = p.Lambda;
  s.lambda = p.lambda;
  s.c = p.c;
  s.d = p.d;
  s.x_bar = xb;
  // Phi0 - Phi1 from the fourth relation, then the second, then the first.
  const double gap = (p.c * (1.0 - xb) + p.d) / (1.0 - std::exp(k.beta * (xb - 1.0)));
  s.Phi0 = (p.Lambda * (p.c + p.d) + 1.0 - p.Lambda * gap) / p.delta;
  s.Phi1 = s.Phi0 - gap;
  s.Phi_plus0 = (p.Lambda * (s.Phi1 + p.c + p.d) + p.lambda * s.Phi0) / (p.delta + p.lambda + p.Lambda);
  return s;
}

Exact1DSolution solve_quintet(const ModelParams& p) {
  Exact1DSolution s = quintet_for_threshold(solve_threshold(p), p);
  fill_atoms(s);
  return s;
}

std::array<double, 4> quintet_residuals(const Exact1DSolution& s) {
  const double k = s.c * s.Lambda / s.lambda;
  const double rep = s.Lambda * (s.Phi1 + s.c + s.d);
  const double jump = s.c * (1.0 - s.x_bar) + s.d;
  return {(s.delta + s.lambda + s.Lambda) * s.Phi_plus0 - s.lambda * s.Phi0 - rep,
          (s.delta + s.Lambda) * s.Phi0 - rep - 1.0,
          (s.Phi_plus0 - s.Phi0 - k) * std::exp(s.gamma * s.x_bar) + s.Phi0 - s.Phi1 + k - jump,
          (s.Phi0 - s.Phi1) * (1.0 - std::exp(s.beta * (s.x_bar - 1.0))) - jump};
}

void fill_atoms(Exact1DSolution& s) {
  if (s.x_bar >= 1.0) throw InvalidThreshold("exact density needs x_bar < 1");
  const double xb = std::max(s.x_bar, 0.0);
  const double u = s.lambda / s.Lambda;
  s.r = 1.0 / (u + std::exp(1.0 - xb));
  s.q = s.r * (u - std::exp(1.0 - xb) * std::expm1(s.alpha * xb));
  s.C1 = s.alpha * s.r * std::exp(1.0 - xb + s.alpha * xb);
}

double exact_value(double x, const Exact1DSolution& s) {
  if (x <= 0.0) return s.Phi0;
  if (x <= s.x_bar) {
    const double k = s.c * s.Lambda / s.lambda;
    return (s.Phi_plus0 - s.Phi0 - k) * std::exp(s.gamma * x) + s.Phi0 + k;
  }
  return -(s.Phi0 - s.Phi1) * std::exp(s.beta * (x - 1.0)) + s.Phi0;
}

double exact_density(double x, const Exact1DSolution& s) {
  if (x <= s.x_bar) return s.C1 * std::exp(-s.alpha * x);
  return s.r * std::exp(1.0 - x);
}

double exact_density_integral(double a, double b, const Exact1DSolution& s) {
  const double xb = std::max(s.x_bar, 0.0);
  auto prim = [&](double x) {
    const double x1 = std::min(x, xb);
    const double x2 = std::max(x, xb);
    const double left = s.C1 / s.alpha * -std::expm1(-s.alpha * x1);
    const double right = s.r * (std::exp(1.0 - xb) - std::exp(1.0 - x2));
    return left + right;
  };
  return prim(b) - prim(a);
}

namespace {

// Integral of the value function over (0, x].
double value_integral(double x, const Exact1DSolution& s) {
  const double k = s.c * s.Lambda / s.lambda;
  const double A = s.Phi_plus0 - s.Phi0 - k, B = s.Phi0 + k;
  const double x1 = std::min(x, s.x_bar);
  double v = A * std::expm1(s.gamma * x1) / s.gamma + B * x1;
  if (x > s.x_bar) {
    const double D = s.Phi0 - s.Phi1;
    v += -D * (std::exp(s.beta * (x - 1.0)) - std::exp(s.beta * (s.x_bar - 1.0))) / s.beta +
         s.Phi0 * (x - s.x_bar);
  }
  return v;
}

} // namespace

double hjb_residual_1d(double x, const Exact1DSolution& s) {
  const double phi = exact_value(x, s);
  // int_(0,1) Phi(max{x-z,0}) dz = int_0^x Phi(u) du + (1-x) Phi0
  const double avg = (x > 0 ? value_integral(x, s) : 0.0) + (1.0 - x) * s.Phi0;
  const double jump = s.lambda * (phi - avg);
  double rep = 0.0;
  if (x < 1.0) rep = s.Lambda * (phi - std::min(phi, s.Phi1 + s.c * (1.0 - x) + s.d));
  return s.delta * phi + jump + rep - (x == 0.0 ? 1.0 : 0.0);
}

double residual_hjb_1d(const Exact1DSolution& s, const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m = std::max(m, std::abs(hjb_residual_1d(x, s)));
  return m;
}

} // namespace impulse
