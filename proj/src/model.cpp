#include "impulse/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "impulse/errors.hpp"

namespace impulse {

namespace {

constexpr double kDomainTol = 1e-12;

void check_unit(double v, const char* what) {
  if (!(v >= -kDomainTol && v <= 1.0 + kDomainTol))
    throw DomainError(std::string(what) + " outside [0,1]: " + std::to_string(v));
}

// Unnormalized CDF of the jump density on (0, z], clipped to (0,1).
double levy_primitive(double z, const ModelParams& p) {
  z = std::clamp(z, 0.0, 1.0);
  if (p.levy.kind == LevyKind::Uniform) return p.lambda * z;
  const double th = p.levy.theta;
  if (th == 0.0) return p.lambda * z;
  // (1 - e^{-th z}) / (1 - e^{-th}), stable for large th
  return p.lambda * std::expm1(-th * z) / std::expm1(-th);
}

} // namespace

void ModelParams::validate() const {
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(delta > 0, "delta must be > 0");
  need(Lambda > 0, "Lambda must be > 0");
  need(lambda > 0, "lambda must be > 0");
  need(d > 0, "d must be > 0");
  need(c >= 0, "c must be >= 0");
  need(xi > 0, "xi must be > 0");
  need(G >= 0, "G must be >= 0");
  need(z_lo >= 0 && z_lo < z_hi, "need 0 <= z_lo < z_hi");
  need(levy.kind != LevyKind::TruncExp || levy.theta > 0, "levy.theta must be > 0");
  if (source.kind == SourceKind::Linear) need(source.S0 >= 0, "source.S0 must be >= 0");
  if (source.kind == SourceKind::Table) {
    const auto& t = source.table;
    need(t.size() >= 2, "source table needs at least two points");
    need(t.front().first == 0.0 && t.back().first == 1.0, "source table must span [0,1]");
    need(t.front().second == 0.0, "source table must start at S(0)=0");
    for (std::size_t k = 1; k < t.size(); ++k) {
      need(t[k].first > t[k - 1].first, "source table abscissae must increase");
      need(t[k].second >= t[k - 1].second, "source table must be nondecreasing");
    }
  }
}

void PhysicalInputs::validate() const {
  if (!(X_bar > 0)) throw ConfigError("X_bar must be > 0");
  if (!(kappa > 0)) throw ConfigError("kappa must be > 0");
}

ModelParams application_params(double theta) {
  ModelParams p;
  p.delta = 0.15;
  p.Lambda = 0.15;
  p.lambda = 1.0;
  p.c = 0.30;
  p.d = 0.15;
  p.xi = 16.8;
  p.G = 0.4;
  p.source = {SourceKind::Linear, 1.0, {}};
  p.levy = {LevyKind::TruncExp, theta};
  p.z_lo = 0.0;
  p.z_hi = 0.25;
  return p;
}

ModelParams exact_case_params() {
  ModelParams p;
  p.delta = 0.1;
  p.c = 0.35;
  p.d = 0.30;
  p.Lambda = 0.25;
  p.lambda = 0.20;
  p.xi = 1.0;
  p.G = 0.0;
  p.source = {SourceKind::Linear, 0.0, {}};
  p.levy = {LevyKind::Uniform, 0.0};
  p.z_lo = 0.0;
  p.z_hi = 1.0;
  return p;
}

double growth(double y, const ModelParams& p) {
  check_unit(y, "y");
  return p.G * y * (1.0 - y);
}

double detachment_factor(double x, double z, const ModelParams& p) {
  check_unit(x, "x");
  if (!(z >= 0)) throw DomainError("jump size must be positive");
  return std::exp(-p.xi * std::min(x, z));
}

double disutility(double y, const ModelParams& p) {
  check_unit(y, "y");
  y = std::clamp(y, 0.0, 1.0);
  switch (p.source.kind) {
    case SourceKind::Linear:
      return p.source.S0 * y;
    case SourceKind::Hinge:
      return 4.0 * std::max(y - 0.5, 0.0);
    case SourceKind::Table: {
      const auto& t = p.source.table;
      auto it = std::upper_bound(t.begin(), t.end(), y,
                                 [](double v, const auto& pt) { return v < pt.first; });
      if (it == t.begin()) return t.front().second;
      if (it == t.end()) return t.back().second;
      const auto& [y1, s1] = *it;
      const auto& [y0, s0] = *(it - 1);
      return s0 + (s1 - s0) * (y - y0) / (y1 - y0);
    }
  }
  return 0.0;
}

double levy_mass(double z1, double z2, const ModelParams& p) {
  if (z2 <= z1) return 0.0;
  return levy_primitive(z2, p) - levy_primitive(z1, p);
}

double effective_intensity(const ModelParams& p) { return levy_mass(p.z_lo, p.z_hi, p); }

double levy_cdf(double z, const ModelParams& p) {
  const double tot = effective_intensity(p);
  const double zc = std::clamp(z, p.z_lo, p.z_hi);
  return levy_mass(p.z_lo, zc, p) / tot;
}

double levy_quantile(double u, const ModelParams& p) {
  const double lo = std::clamp(p.z_lo, 0.0, 1.0);
  const double hi = std::clamp(p.z_hi, 0.0, 1.0);
  if (p.levy.kind == LevyKind::Uniform || p.levy.theta == 0.0) return lo + u * (hi - lo);
  const double th = p.levy.theta;
  // e^{-th z} = e^{-th lo} - u (e^{-th lo} - e^{-th hi})
  const double elo = std::exp(-th * lo);
  const double ehi = std::exp(-th * hi);
  const double z = -std::log(elo - u * (elo - ehi)) / th;
  return std::clamp(z, lo, hi);
}

double xi_from_physics(const PhysicalInputs& phys) {
  phys.validate();
  return phys.kappa * phys.X_bar;
}

double sediment_discharge(double Q_w, const PhysicalInputs& phys) {
  if (Q_w < 0) throw DomainError("water discharge must be >= 0");
  const double excess = phys.shields_coeff * std::pow(Q_w, 0.6) - phys.critical_shields;
  return phys.mpm_coeff * std::pow(std::max(excess, 0.0), 1.5);
}

std::pair<double, double> derive_discharge_coefficients(const PhysicalInputs& phys) {
  const double s = phys.rel_density, g = phys.gravity, dg = phys.grain;
  const double mpm = 8.0 * std::sqrt(s * g * dg * dg * dg);
  // wide-channel Manning depth: h = (n Q / (B sqrt(S)))^{0.6}
  const double depth_coeff = std::pow(phys.roughness / (phys.width * std::sqrt(phys.slope)), 0.6);
  const double shields = depth_coeff * phys.slope / (s * dg);
  return {mpm, shields};
}

} // namespace impulse
