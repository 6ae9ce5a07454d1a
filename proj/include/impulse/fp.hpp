#ifndef IMPULSE_FP_HPP
#define IMPULSE_FP_HPP

#include <vector>

#include "impulse/jumpgrid.hpp"
#include "impulse/model.hpp"

namespace impulse {

// Cell densities p plus atom weights q (x = 0) and r (x = 1) per cell row.
// In 1-D there is one row and q, r are plain masses.
struct DensityField {
  int n = 0;
  bool two_d = false;
  std::vector<double> p; // [cell_rows x n], index j*n+i
  std::vector<double> q, r;
  double t = 0.0;

  int cell_rows() const { return two_d ? n : 1; }
  double row_weight() const { return two_d ? 1.0 / n : 1.0; }
  double& at(int i, int j) { return p[static_cast<std::size_t>(j) * n + i]; }
  double at(int i, int j) const { return p[static_cast<std::size_t>(j) * n + i]; }
  double mass() const;
};

enum class FpInit { Uniform, Corner };
DensityField make_density(int n, bool two_d, FpInit init = FpInit::Uniform);

// Replenishment data per cell row: k_j cells fire, and the x = 0 atom fires when x_bar_j >= 0.
struct Replenish {
  std::vector<int> k;
  std::vector<bool> atom;
};
// From per-cell-row thresholds.
Replenish make_replenish(const std::vector<double>& x_bar, int n);
// Cell row j of a 2-D grid takes the threshold of vertex row j+1; 1-D passes through.
std::vector<double> cell_row_thresholds(const std::vector<double>& vertex_x_bar, bool two_d);

struct Fluxes {
  // face f lies at y = f h, f = 0..cell_rows; faces 0 and cell_rows carry zero flux
  std::vector<double> Fp; // [(cell_rows+1) x n]
  std::vector<double> Fq, Fr;
};
Fluxes upwind_fluxes(const DensityField& f, const ModelParams& p, bool weno = false);

struct Inflow {
  std::vector<double> J;  // [cell_rows x n]
  std::vector<double> JL; // [cell_rows]
};
Inflow jump_inflow(const DensityField& f, const JumpGrid& g);

// Replenishment balance: -sum Lambda q_j w - sum Lambda p h w + sum Lambda m_j w over firing parts.
double replenish_balance(const DensityField& f, const Replenish& rep, const ModelParams& p);
// sum JL w + sum J h w - lambda_eff (sum p h w + sum r w)
double inflow_balance(const DensityField& f, const JumpGrid& g);

struct FpOptions {
  double tol = 1e-10;
  long max_steps = 10000000;
  bool weno = false;
  bool per_unit_time = false; // divide the per-step change by dt
  long history_every = 100;
};

bool stable_step(const GridSpec& spec, const JumpGrid& g, const ModelParams& p);

DensityField euler_step(const DensityField& f, const GridSpec& spec, const JumpGrid& g,
                        const ModelParams& p, const Replenish& rep, bool weno = false);

struct FpResult {
  DensityField field;
  long steps = 0;
  double max_mass_drift = 0.0;  // max |M - M0| over the run
  double max_step_drift = 0.0;  // max per-step |dM|
  double min_value = 0.0;
  std::vector<std::pair<double, double>> history; // (t, M)
};

FpResult solve_stationary(const GridSpec& spec, const JumpGrid& g, const ModelParams& p,
                          const std::vector<double>& cell_x_bar, const FpOptions& opt = {},
                          const DensityField* init = nullptr);

} // namespace impulse

#endif
