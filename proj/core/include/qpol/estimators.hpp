#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qpol/optics.hpp"
#include "qpol/photostats.hpp"

namespace qpol {

enum class EstimatorKind { Single, Diff, Dsr };

std::string_view to_string(EstimatorKind kind);

enum class CalibrationSource { Configured, FittedFromBlankScan };

/// Diagnostics of a blank-scan efficiency fit.
struct CalibrationFit {
  double stderr_h = 0.0;
  double stderr_v = 0.0;
  double residual_rms_h = 0.0;  // RMS of <N_H>/nu - eta_h cos^2(theta_in)
  double residual_rms_v = 0.0;
  double noise_rms_h = 0.0;     // RMS standard error of the per-angle means
  double noise_rms_v = 0.0;
  std::size_t points = 0;

  /// Residual RMS within `factor` times the counting-noise level on both channels.
  bool consistent(double factor = 3.0) const;
};

struct Calibration {
  double eta_h = 0.25;
  double eta_v = 0.25;
  CalibrationSource source = CalibrationSource::Configured;
  std::optional<CalibrationFit> fit;

  static Calibration configured(double eta_h, double eta_v);
  void validate() const;
};

/// Per-campaign estimate of the output angle and the derived concentration.
struct Estimate {
  EstimatorKind kind = EstimatorKind::Dsr;
  double theta_out_mean_deg = 0.0;
  double theta_out_std_deg = 0.0;  // population standard deviation over usable trials
  double alpha_deg = 0.0;
  double concentration = 0.0;
  double concentration_std = 0.0;
  bool excluded = false;           // true -> concentration is advisory only
  bool region_excluded = false;    // set by the 3-sigma loss rule
  std::size_t trials_used = 0;
  std::size_t trials_dropped = 0;  // empty DSR denominators and unphysical inversions
};

/// Estimator statistic of one trial: N_H/nu, (N_H - N_V)/nu or (N_H - N_V)/(N_H + N_V).
/// Throws EmptyDenominator for DSR with no counts.
double outcome_value(const CountRecord& record, EstimatorKind kind);

/// Transmittance implied by an estimator statistic under `calibration`.
double transmittance_from_statistic(double statistic, EstimatorKind kind, const Calibration& calibration);

/// Of the candidates {+-theta + k*180deg}, the one nearest `hint`.
PolarizationAngle resolve_branch(double principal_rad, PolarizationAngle hint);

/// Invert an estimator statistic to an output angle. Throws UnphysicalStatistic
/// when the implied transmittance leaves [0, 1].
PolarizationAngle invert_to_theta(double statistic, EstimatorKind kind, const Calibration& calibration,
                                  PolarizationAngle branch_hint);

/// 3-sigma loss rule: excluded iff eta_s nu - E[N_s] < 3 Std[N_s] on either channel.
bool exclusion_check(PolarizationAngle theta_out, const Calibration& calibration, std::uint64_t nu);

struct EstimateOptions {
  /// Branch selection point; defaults to theta_in.
  std::optional<PolarizationAngle> branch_hint;
  /// Fraction of dropped trials above which the campaign is marked excluded.
  double max_dropped_fraction = 0.01;
};

/// Estimate theta_out, alpha and C from one campaign at fixed theta_in.
Estimate estimate_concentration(std::span<const CountRecord> campaign, EstimatorKind kind,
                                const Calibration& calibration, PolarizationAngle theta_in,
                                const SampleGeometry& geometry, const EstimateOptions& options = {});

struct BlankScanPoint {
  PolarizationAngle theta_in;
  std::vector<CountRecord> campaign;
};

/// Per-angle count fractions of a blank scan and their standard errors.
struct BlankScanSummary {
  PolarizationAngle theta_in;
  double fraction_h = 0.0;  // <N_H>/nu
  double fraction_v = 0.0;  // <N_V>/nu
  double stderr_h = 0.0;
  double stderr_v = 0.0;
};

BlankScanSummary summarize(const BlankScanPoint& point);

/// Least-squares fit of <N_H>/nu = eta_h cos^2 and <N_V>/nu = eta_v sin^2 over
/// a pure-solvent scan (alpha = 0), weighted by the per-angle standard errors
/// when all informative points carry one (ordinary least squares otherwise).
/// Throws FitDegenerate with fewer than two
/// distinct angles and DomainError with fewer than five.
Calibration calibrate_efficiencies(std::span<const BlankScanSummary> scan);
Calibration calibrate_efficiencies(std::span<const BlankScanPoint> scan);

}  // namespace qpol
