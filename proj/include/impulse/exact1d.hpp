#ifndef IMPULSE_EXACT1D_HPP
#define IMPULSE_EXACT1D_HPP

#include <array>
#include <vector>

#include "impulse/model.hpp"

namespace impulse {

struct Exact1DSolution {
  double Phi0 = 0, Phi_plus0 = 0, Phi1 = 0;
  double x_bar = 0;
  double beta = 0, gamma = 0, alpha = 0;
  double q = 0, r = 0;
  double C1 = 0;
  // parameters the solution was built from
  double delta = 0, Lambda = 0, lambda = 0, c = 0, d = 0;
};

// Left/right sides of the scalar threshold equation.
double threshold_lhs(double x_bar, const ModelParams& p);
double threshold_rhs(double x_bar, const ModelParams& p);

double solve_threshold(const ModelParams& p);
Exact1DSolution solve_quintet(const ModelParams& p);
// Builds the solution for a given threshold (anchors from three of the four relations).
Exact1DSolution quintet_for_threshold(double x_bar, const ModelParams& p);
// Residuals of the four relations of the quintet system.
std::array<double, 4> quintet_residuals(const Exact1DSolution& s);

double exact_value(double x, const Exact1DSolution& s);
// Interior density; x = x_bar belongs to the left branch.
double exact_density(double x, const Exact1DSolution& s);
// Integral of the interior density over (a, b).
double exact_density_integral(double a, double b, const Exact1DSolution& s);
// Fills q, r and C1 for s.x_bar; throws InvalidThreshold if x_bar >= 1.
void fill_atoms(Exact1DSolution& s);

// Residual of the 1-D HJB at x, jump integral evaluated in closed form.
double hjb_residual_1d(double x, const Exact1DSolution& s);
double residual_hjb_1d(const Exact1DSolution& s, const std::vector<double>& xs);

} // namespace impulse

#endif
