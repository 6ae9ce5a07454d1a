#ifndef IMPULSE_HARNESS_HPP
#define IMPULSE_HARNESS_HPP

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "impulse/exact1d.hpp"
#include "impulse/fp.hpp"
#include "impulse/hjb.hpp"
#include "impulse/jumpgrid.hpp"
#include "impulse/mc.hpp"
#include "impulse/model.hpp"

namespace impulse {

// Where the FP/MC stages take x_bar from.
enum class ThresholdSource { Exact, Hjb, File };

struct CompareTolerances {
  double l1 = 0.05;        // interior l1 distance
  double max_rel = 0.25;   // relative gap of the atom maxima
};

struct ExperimentConfig {
  ModelParams model;
  std::optional<PhysicalInputs> physical;
  GridSpec grid;                       // resolved at grid.n
  std::string rho_preset;              // empty: sec41 in 1-D, sec42 in 2-D
  std::optional<double> rho, dt;       // explicit values beat the n-scaled defaults
  std::vector<std::string> pipeline;   // exact1d | hjb | fp | mc | compare
  std::vector<int> sweep_n;
  std::string sweep_L = "2n";          // "2n", "n", "n/2", or an integer
  std::string sweep_kind = "hjb";      // hjb | fp
  std::string output_dir;
  ThresholdSource thresholds = ThresholdSource::Hjb;
  std::string threshold_file;
  HjbOptions hjb;
  FpOptions fp;
  McOptions mc;
  CompareTolerances compare;

  // Applies the 1-D reduction (G = 0, S = 0), resolves grid and validates.
  void finalize();
  // Grid for another resolution with the same rho/dt rules (dt defaults to 2/n in 1-D, 1/n in 2-D).
  GridSpec grid_at(int n, int L) const;
  double rho_preset_value(int n) const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& c);

// Value of an L rule at n; throws ConfigError when the result is < 1.
int evaluate_L_rule(const std::string& rule, int n);

// Output directory: the explicit value, else $IMPULSE_OUT_DIR, else "out".
std::string default_output_dir(const std::string& explicit_dir = "");

struct ErrorNorms {
  double l1 = 0, l2 = 0, linf = 0;
};

// Weighted norms of num - ref; throws GridMismatch on size mismatch.
ErrorNorms error_norms(const std::vector<double>& num, const std::vector<double>& ref,
                       const std::vector<double>& w);
// HJB vertex field vs exact_value (row 0 of a 1-D field); trapezoid weights.
ErrorNorms hjb_error(const ValueField& f, const Exact1DSolution& s);
// FP interior cells vs the exact density at cell centres.
ErrorNorms fp_error(const DensityField& f, const Exact1DSolution& s);

// Exact 1-D density as cell averages plus atoms, on the FP grid of size n.
DensityField exact_density_field(const Exact1DSolution& s, int n);

// log2(e_k / e_{k+1}); empty for fewer than two entries.
std::vector<double> convergence_rates(const std::vector<double>& e);

struct SweepRow {
  int n = 0, L = 0;
  ErrorNorms err;
  double cr1 = 0, cr2 = 0, crinf = 0; // NaN on the last row
  double threshold = -1.0;            // HJB row 0 (1-D) threshold
  double threshold_error = 0.0;
  double q = 0, r = 0;                // FP atoms
  std::string status = "ok";
};

// 1-D sweeps against the closed form; 2-D sweeps use the finest grid as reference.
std::vector<SweepRow> convergence_sweep(const ExperimentConfig& c);

struct CompareReport {
  double max_p[2] = {0, 0}, max_q[2] = {0, 0}, max_r[2] = {0, 0};
  double l1_interior = 0;
  double l1_q = 0, l1_r = 0;   // row-weighted atom profile distances
  double mass_q[2] = {0, 0}, mass_r[2] = {0, 0};
  bool pass = false;
};

CompareReport compare_densities(const DensityField& a, const DensityField& b,
                                const CompareTolerances& tol = {});

// CSV emission. All numbers use 17 significant digits, so reruns are byte-identical.
void write_value_csv(const std::string& path, const ValueField& f);
void write_thresholds_csv(const std::string& path, const std::vector<double>& x_bar, bool two_d);
std::vector<double> read_thresholds_csv(const std::string& path);
void write_density_csv(const std::string& path, const DensityField& f);
DensityField read_density_csv(const std::string& path);
void write_history_csv(const std::string& path, const std::vector<std::pair<double, double>>& h);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);
void write_exact_csv(const std::string& path, const Exact1DSolution& s, int points);

// Path of a file beside `path` with `suffix` inserted before the extension.
std::string sibling_path(const std::string& path, const std::string& suffix);

struct PipelineResult {
  nlohmann::json manifest;
  bool compare_failed = false;
};

// Runs the stages in order and writes manifest.json into the output directory.
// Stage failures are rethrown as Error with the stage name prepended.
PipelineResult run_pipeline(const ExperimentConfig& c);

} // namespace impulse

#endif
