#ifndef IMPULSE_HJB_HPP
#define IMPULSE_HJB_HPP

#include <utility>
#include <vector>

#include "impulse/jumpgrid.hpp"
#include "impulse/model.hpp"

namespace impulse {

struct ValueField {
  int n = 0;
  bool two_d = false;
  std::vector<double> Phi;  // [rows x (n+1)], index j*(n+1)+i
  std::vector<double> eta;
  std::vector<double> x_bar;          // per row, -1 if no replenishment
  std::vector<bool> threshold_row;    // false where the replenish set is not a prefix
  long iterations = 0;
  double final_residual = 0.0;

  int rows() const { return two_d ? n + 1 : 1; }
  double& at(int i, int j) { return Phi[static_cast<std::size_t>(j) * (n + 1) + i]; }
  double at(int i, int j) const { return Phi[static_cast<std::size_t>(j) * (n + 1) + i]; }
  bool all_threshold() const;
};

ValueField make_value_field(int n, bool two_d, double fill = 0.0);

enum class Interp { Weno, Linear };

struct HjbOptions {
  double tol = 1e-12;
  long max_iter = 1000000;
  Interp interp = Interp::Weno;
  // Local-implicit Jacobi sweeps before the plain fixed-point sweeps; the exit
  // test is always on plain sweeps, so the fixed point is the same.
  bool accelerate = true;
  long stall_window = 50; // accelerated sweeps without progress before falling back
};

// Jump term (N Phi)_{i,j} = -lambda_eff Phi_{i,j} + sum_l nu_l Phi at the post-jump vertex.
double nonlocal_jump(const ValueField& f, const JumpGrid& g, int i, int j);

// Returns (Lambda (Phi - min{Phi, Phi_n + c(1-x) + d}), eta); ties keep eta = 0.
std::pair<double, double> replenish_operator(const ValueField& f, int i, int j, const ModelParams& p);

// Value of column data v (vertex rows 0..n, spacing h) at ordinate y.
double interpolate_column(const double* v, int stride, int n, double y, Interp mode);

// Phi evaluated at (x_i, y_j + f(y_j) rho), foot clamped to [0,1].
ValueField semi_lagrangian_advect(const ValueField& f, double rho, const ModelParams& p,
                                  Interp mode = Interp::Weno);

ValueField value_iteration(const GridSpec& spec, const JumpGrid& g, const ModelParams& p,
                           const HjbOptions& opt = {});

// Fills f.x_bar and f.threshold_row from f.eta and returns x_bar.
std::vector<double> detect_threshold(ValueField& f);

} // namespace impulse

#endif
