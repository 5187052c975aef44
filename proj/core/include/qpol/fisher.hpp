#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "qpol/estimators.hpp"
#include "qpol/optics.hpp"
#include "qpol/photostats.hpp"

namespace qpol {

/// Photon-number-counting measurement: both PBS ports, or one port only.
enum class Scheme { TwoMode, SingleModeH, SingleModeV };

std::string_view to_string(Scheme scheme);

/// Closed-form Fisher information on theta_out (rad^-2) for one probe of
/// `photons` photons (Fock number, or coherent mean for Classical). Uses
/// (dT/dtheta)^2 = 4 T R. Throws SingularPoint at T in {0, 1} and where the
/// two-mode quantum loss cell vanishes with unequal efficiencies.
double fi_closed(Scheme scheme, Regime regime, PolarizationAngle theta_out, double eta_h, double eta_v,
                 double photons = 1.0);

/// Outcome probabilities as a function of theta (radians). Every call must
/// return the same support in the same order.
using DistributionFamily = std::function<std::vector<double>(double theta_rad)>;

enum class Differencing { Central, Richardson };

/// Brute-force Fisher information sum_x (dp_x/dtheta)^2 / p_x with
/// finite-difference derivatives. Throws TruncationError if the support holds
/// less than 1 - tail_tolerance of the mass at theta.
double fi_numeric(const DistributionFamily& family, double theta_rad, double step = 1e-5,
                  Differencing differencing = Differencing::Central, double tail_tolerance = 1e-12);

/// Outcome family of one probe, built from the photostats models. Classical
/// supports are truncated once for the whole family at the largest possible mean.
DistributionFamily outcome_family(Scheme scheme, Regime regime, double eta_h, double eta_v,
                                  double photons = 1.0);

/// Joint law of `copies` independent draws of `family`.
DistributionFamily product_family(DistributionFamily family, unsigned copies);

struct FisherReport {
  Scheme scheme = Scheme::TwoMode;
  Regime regime = Regime::Quantum;
  EstimatorKind kind = EstimatorKind::Dsr;
  double theta_out_deg = 0.0;
  double transmittance = 0.0;
  double fi_closed = 0.0;        // per herald, rad^-2
  double fi_numeric = 0.0;       // per herald, rad^-2
  double fi_campaign = 0.0;      // nu * fi_closed
  double cr_bound = 0.0;         // 1 / sqrt(nu fi_closed), rad
  double lep_value = 0.0;        // linear-error-propagation uncertainty, rad
  double saturation_gap = 0.0;   // lep * sqrt(nu fi) - 1
};

/// Estimator paired with a scheme: single <-> SingleModeH, diff/dsr <-> TwoMode.
/// Throws DomainError for any other pairing.
void check_pairing(EstimatorKind kind, Scheme scheme);

FisherReport fisher_report(EstimatorKind kind, Scheme scheme, Regime regime, PolarizationAngle theta_out,
                           double eta_h, double eta_v, double nu, double mean_photons = 1.0);

struct SaturationReport {
  std::vector<FisherReport> rows;
  double min_gap = 0.0;
  double max_gap = 0.0;
  bool saturated = false;      // |gap| <= tolerance on every row
  bool bound_respected = false;  // gap >= -tolerance on every row
};

SaturationReport saturation_check(EstimatorKind kind, Scheme scheme, Regime regime,
                                  std::span<const double> theta_grid_deg, double eta_h, double eta_v, double nu,
                                  double mean_photons = 1.0, double tolerance = 1e-9);

/// Delimited export for plotting, one row per report.
void write_fisher_csv(std::ostream& out, std::span<const FisherReport> rows);

}  // namespace qpol
