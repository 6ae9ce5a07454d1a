#ifndef IMPULSE_MODEL_HPP
#define IMPULSE_MODEL_HPP

#include <optional>
#include <utility>
#include <vector>

namespace impulse {

enum class SourceKind { Linear, Hinge, Table };

// Disutility S(y). Table is piecewise linear through (y_k, S_k).
struct SourceSpec {
  SourceKind kind = SourceKind::Linear;
  double S0 = 0.0;
  std::vector<std::pair<double, double>> table;
};

enum class LevyKind { Uniform, TruncExp };

// Jump density on (0,1): lambda for Uniform, lambda*theta*e^{-theta z}/(1-e^{-theta}) for TruncExp.
struct LevySpec {
  LevyKind kind = LevyKind::Uniform;
  double theta = 0.0;
};

struct ModelParams {
  double delta = 0.1;
  double Lambda = 0.25;
  double lambda = 0.2;
  double c = 0.35;
  double d = 0.30;
  double xi = 1.0;
  double G = 0.0;
  SourceSpec source;
  LevySpec levy;
  double z_lo = 0.0;
  double z_hi = 1.0;

  // Throws ConfigError naming the first violated invariant.
  void validate() const;
};

// Appendix-style physical inputs. The discharge coefficients default to the
// rounded closed formula; derive_discharge_coefficients recomputes them from
// Meyer-Peter Mueller + Manning for a wide channel.
struct PhysicalInputs {
  double X_bar = 4.0;     // m^3/m
  double kappa = 4.2;     // 1/m^2
  double width = 25.0;    // m
  double slope = 1e-3;
  double roughness = 0.03; // Manning n
  double grain = 0.005;   // m
  double rel_density = 1.6;
  double gravity = 9.8;
  double mpm_coeff = 0.0112;
  double shields_coeff = 0.0176;
  double critical_shields = 0.047;

  void validate() const;
};

// Section 4.2 application (theta = 50 unless overridden) and the 1-D test case.
ModelParams application_params(double theta = 50.0);
ModelParams exact_case_params();

double growth(double y, const ModelParams& p);
double detachment_factor(double x, double z, const ModelParams& p);
double disutility(double y, const ModelParams& p);
double levy_mass(double z1, double z2, const ModelParams& p);
// lambda_eff: mass on the cutoff support (z_lo, z_hi).
double effective_intensity(const ModelParams& p);
// Inverse of the normalized CDF of the jump law on (z_lo, z_hi).
double levy_quantile(double u, const ModelParams& p);
double levy_cdf(double z, const ModelParams& p);

double xi_from_physics(const PhysicalInputs& phys);
double sediment_discharge(double Q_w, const PhysicalInputs& phys);
// Returns {mpm_coeff, shields_coeff} from the channel geometry.
std::pair<double, double> derive_discharge_coefficients(const PhysicalInputs& phys);

} // namespace impulse

#endif
