#pragma once

#include <array>
#include <optional>

#include "qpol/estimators.hpp"
#include "qpol/optics.hpp"
#include "qpol/photostats.hpp"

namespace qpol {

/// Operating point for the linear-error-propagation closed forms.
struct UncertaintyContext {
  EstimatorKind kind = EstimatorKind::Dsr;
  Regime regime = Regime::Quantum;
  PolarizationAngle theta_out;
  double eta_h = 0.25;
  double eta_v = 0.25;
  double nu = 1e5;
  double mean_photons = 1.0;  // classical regime only
};

/// Linear-error-propagation uncertainty of theta_out in radians.
///
/// Quantum regime:
///   single: sqrt((1 - eta_h T) / (4 eta_h (1 - T))) / sqrt(nu)
///   diff:   sqrt((S - D^2) / (4 (eta_h + eta_v)^2 T R)) / sqrt(nu)
///   dsr:    sqrt(S / (4 eta_h eta_v)) / sqrt(nu)
/// with S = eta_h T + eta_v R and D = eta_h T - eta_v R. The classical regime
/// drops the multinomial anticorrelation (single: 1 / (4 eta_h R), diff: S / (...))
/// and scales by 1 / mean_photons; dsr keeps the same form.
///
/// Throws SingularPoint where the form diverges (single at T = 1, diff at T in {0, 1}).
double lep_uncertainty(const UncertaintyContext& ctx);

/// Inputs of the covariance expansion: partial derivatives of the statistic with
/// respect to (N_H, N_V), the count covariance matrix and d<f>/dtheta_out.
struct CountMoments {
  std::array<double, 2> partials{};
  std::array<std::array<double, 2>, 2> covariance{};
  double slope = 0.0;
};

/// Model moments for a campaign trial of `ctx.nu` heralds.
CountMoments model_moments(const UncertaintyContext& ctx);

/// sqrt(sum_jk df/dN_j df/dN_k Cov_jk) / |d<f>/dtheta|. Throws ZeroSlope when
/// |slope| < `slope_epsilon` and DomainError for a non-PSD covariance.
double covariance_propagation(const CountMoments& moments, double slope_epsilon = 1e-12);

/// Ratio of classical to quantum LEP uncertainty at matching photon budget.
double quantum_enhancement(EstimatorKind kind, PolarizationAngle theta_out, double eta_h, double eta_v);

struct Extremum {
  double value = 0.0;          // radians
  double transmittance = 0.0;  // location
};

struct ExtremaReport {
  Extremum min;
  std::optional<Extremum> max;  // nullopt: unbounded on (0, 1)
  bool constant = false;
};

/// Closed-form extrema of lep_uncertainty over T in [0, 1].
ExtremaReport extrema(EstimatorKind kind, Regime regime, double eta_h, double eta_v, double nu);

/// First-order response to PBS leakage. The `delta_*` fields are the raw
/// derivatives (per unit r_PE); `bias_*` are the same scaled by r_pe.
struct PeBias {
  double delta_f = 0.0;
  double delta_theta = 0.0;        // radians; cot(2 theta_out)
  double delta_uncertainty = 0.0;  // radians
  double bias_f = 0.0;
  double bias_theta = 0.0;
  double bias_uncertainty = 0.0;
  bool large_leakage = false;      // r_pe > 0.05, first order unreliable
};

/// Throws SingularPoint at T in {0, 1}, where delta_theta diverges.
PeBias pe_bias(EstimatorKind kind, PolarizationAngle theta_out, double eta_h, double eta_v, double r_pe,
               double nu);

}  // namespace qpol
