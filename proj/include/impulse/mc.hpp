#ifndef IMPULSE_MC_HPP
#define IMPULSE_MC_HPP

#include <cstdint>
#include <vector>

#include "impulse/fp.hpp"
#include "impulse/model.hpp"
#include "impulse/rng.hpp"

namespace impulse {

// Replenish iff x <= x_bar(y). Rows are HJB vertex rows; a population in
// ((j-1)h, jh] uses row j and y = 0 uses row 0. 1-D policies have one row.
struct ThresholdPolicy {
  std::vector<double> x_bar{-1.0};
  bool two_d = false;
  int n = 0;

  static ThresholdPolicy constant(double x_bar);
  static ThresholdPolicy rows(const std::vector<double>& x_bar, bool two_d);
  double at(double y) const;
};

struct PathState {
  double x = 1.0, y = 0.0, t = 0.0;
  double depletion = 0.0;  // discounted time at x = 0
  double disutility = 0.0; // discounted integral of S(y)
  double cost = 0.0;       // discounted replenishment costs
  long jumps = 0, observations = 0, replenishments = 0;
  double objective() const { return depletion + disutility + cost; }
};

PathState simulate_path(double x0, double y0, double horizon, double dt, const ModelParams& p,
                        const ThresholdPolicy& policy, Philox& rng);

struct McOptions {
  long paths = 100000;
  double dt = 0.02;
  double horizon = -1.0;     // objective horizon; < 0 picks a bias below 1e-10
  double burn_in = -1.0;     // < 0 means 20 / min(delta, Lambda, lambda_eff)
  double window = 100.0;     // averaging window after burn-in (days)
  double sample_every = 1.0; // days between samples inside the window
  double x0 = 1.0, y0 = 0.5;
  std::uint64_t seed = 12345;
  int workers = 0;           // 0: hardware concurrency
};

struct McDensity {
  DensityField field;
  long samples = 0;
  double burn_in = 0.0;
};

// Histogram over n cells (per axis in 2-D) with exact-boundary atoms.
McDensity estimate_density(const ModelParams& p, const ThresholdPolicy& policy, int n, bool two_d,
                           const McOptions& opt);

struct McObjective {
  double mean = 0.0;
  double stderr_ = 0.0;
  double bias_bound = 0.0;
  double horizon = 0.0;
  long paths = 0;
};

McObjective estimate_objective(double x0, double y0, const ModelParams& p, const ThresholdPolicy& policy,
                               const McOptions& opt);

double default_burn_in(const ModelParams& p);

} // namespace impulse

#endif
