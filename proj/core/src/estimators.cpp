#include "qpol/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qpol/errors.hpp"

namespace qpol {

namespace {

constexpr double kPi = std::numbers::pi;

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Population standard deviation, two-pass.
double population_std(std::span<const double> xs, double mean) {
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

}  // namespace

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Single: return "single";
    case EstimatorKind::Diff: return "diff";
    case EstimatorKind::Dsr: return "dsr";
  }
  return "unknown";
}

bool CalibrationFit::consistent(double factor) const {
  return residual_rms_h <= factor * noise_rms_h && residual_rms_v <= factor * noise_rms_v;
}

Calibration Calibration::configured(double eta_h, double eta_v) {
  Calibration c{eta_h, eta_v, CalibrationSource::Configured, std::nullopt};
  c.validate();
  return c;
}

void Calibration::validate() const {
  if (!(eta_h >= 0.0 && eta_h <= 1.0) || !(eta_v >= 0.0 && eta_v <= 1.0)) {
    throw DomainError("calibration efficiencies must lie in [0, 1]");
  }
}

double outcome_value(const CountRecord& record, EstimatorKind kind) {
  const double nh = static_cast<double>(record.n_h);
  const double nv = static_cast<double>(record.n_v);
  switch (kind) {
    case EstimatorKind::Single:
      if (record.nu == 0) throw DomainError("record has nu = 0");
      return nh / static_cast<double>(record.nu);
    case EstimatorKind::Diff:
      if (record.nu == 0) throw DomainError("record has nu = 0");
      return (nh - nv) / static_cast<double>(record.nu);
    case EstimatorKind::Dsr:
      if (record.n_h + record.n_v == 0) throw EmptyDenominator("DSR undefined for a trial with no counts");
      return (nh - nv) / (nh + nv);
  }
  throw DomainError("unknown estimator kind");
}

double transmittance_from_statistic(double f, EstimatorKind kind, const Calibration& cal) {
  switch (kind) {
    case EstimatorKind::Single:
      if (cal.eta_h <= 0.0) throw DomainError("single estimator needs eta_h > 0");
      return f / cal.eta_h;
    case EstimatorKind::Diff:
      if (cal.eta_h + cal.eta_v <= 0.0) throw DomainError("diff estimator needs eta_h + eta_v > 0");
      return (f + cal.eta_v) / (cal.eta_h + cal.eta_v);
    case EstimatorKind::Dsr: {
      const double num = cal.eta_v * (1.0 + f);
      const double den = cal.eta_h * (1.0 - f) + num;
      if (den == 0.0) throw DomainError("DSR inversion undefined for zero efficiencies");
      return num / den;
    }
  }
  throw DomainError("unknown estimator kind");
}

PolarizationAngle resolve_branch(double principal_rad, PolarizationAngle hint) {
  const double h = hint.radians();
  double best = 0.0;
  double best_dist = INFINITY;
  for (double base : {principal_rad, -principal_rad}) {
    const double k = std::round((h - base) / kPi);
    for (double dk : {-1.0, 0.0, 1.0}) {
      const double cand = base + (k + dk) * kPi;
      const double d = std::abs(cand - h);
      // Ties go to the larger candidate so the choice is deterministic.
      if (d < best_dist || (d == best_dist && cand > best)) {
        best = cand;
        best_dist = d;
      }
    }
  }
  return PolarizationAngle::from_radians(best);
}

PolarizationAngle invert_to_theta(double f, EstimatorKind kind, const Calibration& cal,
                                  PolarizationAngle branch_hint) {
  const double t = transmittance_from_statistic(f, kind, cal);
  if (!(t >= 0.0 && t <= 1.0)) {
    throw UnphysicalStatistic("statistic implies transmittance " + std::to_string(t) + " outside [0, 1]", t);
  }
  return resolve_branch(std::acos(std::sqrt(t)), branch_hint);
}

bool exclusion_check(PolarizationAngle theta_out, const Calibration& cal, std::uint64_t nu) {
  const Projection proj = projection_coefficients(theta_out);
  const double n = static_cast<double>(nu);
  auto violates = [n](double eta, double share) {
    const double p = eta * share;
    const double mean = n * p;
    const double sd = std::sqrt(n * p * (1.0 - p));
    return eta * n - mean < 3.0 * sd;
  };
  return violates(cal.eta_h, proj.transmittance) || violates(cal.eta_v, proj.reflectance);
}

Estimate estimate_concentration(std::span<const CountRecord> campaign, EstimatorKind kind,
                                const Calibration& cal, PolarizationAngle theta_in,
                                const SampleGeometry& geometry, const EstimateOptions& options) {
  if (campaign.size() < 2) throw DomainError("a campaign needs at least 2 trials for a spread estimate");
  cal.validate();
  const PolarizationAngle hint = options.branch_hint.value_or(theta_in);

  std::vector<double> thetas;
  thetas.reserve(campaign.size());
  Estimate est;
  est.kind = kind;
  for (const auto& rec : campaign) {
    try {
      thetas.push_back(invert_to_theta(outcome_value(rec, kind), kind, cal, hint).degrees());
    } catch (const EmptyDenominator&) {
      ++est.trials_dropped;
    } catch (const UnphysicalStatistic&) {
      ++est.trials_dropped;
    }
  }
  est.trials_used = thetas.size();

  const double rot = specific_rotation(geometry.wavelength_nm, geometry.transitions);
  if (thetas.empty()) {
    est.theta_out_mean_deg = est.theta_out_std_deg = est.alpha_deg = NAN;
    est.concentration = est.concentration_std = NAN;
    est.excluded = true;
    return est;
  }
  est.theta_out_mean_deg = mean_of(thetas);
  est.theta_out_std_deg = population_std(thetas, est.theta_out_mean_deg);
  est.alpha_deg = est.theta_out_mean_deg - theta_in.degrees();
  est.concentration = concentration_from_angle(est.alpha_deg, rot, geometry.path_length_dm);
  est.concentration_std = std::abs(est.theta_out_std_deg / (rot * geometry.path_length_dm));

  const std::uint64_t nu = campaign.front().nu;
  est.region_excluded = exclusion_check(PolarizationAngle::from_degrees(est.theta_out_mean_deg), cal, nu);
  const double dropped = static_cast<double>(est.trials_dropped) / static_cast<double>(campaign.size());
  est.excluded = est.region_excluded || dropped > options.max_dropped_fraction || est.trials_used < 2;
  return est;
}

BlankScanSummary summarize(const BlankScanPoint& point) {
  if (point.campaign.empty()) throw DomainError("blank-scan point without trials");
  std::vector<double> fh, fv;
  for (const auto& rec : point.campaign) {
    if (rec.nu == 0) throw DomainError("record has nu = 0");
    fh.push_back(static_cast<double>(rec.n_h) / static_cast<double>(rec.nu));
    fv.push_back(static_cast<double>(rec.n_v) / static_cast<double>(rec.nu));
  }
  BlankScanSummary out{point.theta_in, mean_of(fh), mean_of(fv), 0.0, 0.0};
  if (fh.size() > 1) {
    const double m = static_cast<double>(fh.size());
    out.stderr_h = population_std(fh, out.fraction_h) / std::sqrt(m - 1.0);
    out.stderr_v = population_std(fv, out.fraction_v) / std::sqrt(m - 1.0);
  }
  return out;
}

Calibration calibrate_efficiencies(std::span<const BlankScanSummary> scan) {
  std::set<double> distinct;
  for (const auto& pt : scan) distinct.insert(pt.theta_in.radians());
  if (distinct.size() < 2) throw FitDegenerate("blank scan needs at least two distinct input angles");
  if (distinct.size() < 5) throw DomainError("blank scan needs at least five distinct input angles");

  // Regression through the origin on each channel, weighted by the per-angle
  // standard errors when every informative point has one.
  struct Channel {
    double sxx = 0, sxy = 0, swxx = 0, swxy = 0;
    bool weighted = true;
  };
  Channel h, v;
  auto accumulate = [](Channel& c, double x, double y, double se) {
    c.sxx += x * x;
    c.sxy += x * y;
    if (x == 0.0) return;
    if (se > 0.0) {
      c.swxx += x * x / (se * se);
      c.swxy += x * y / (se * se);
    } else {
      c.weighted = false;
    }
  };
  for (const auto& pt : scan) {
    const Projection proj = projection_coefficients(pt.theta_in);
    accumulate(h, proj.transmittance, pt.fraction_h, pt.stderr_h);
    accumulate(v, proj.reflectance, pt.fraction_v, pt.stderr_v);
  }
  if (h.sxx <= 0.0 || v.sxx <= 0.0) throw FitDegenerate("blank scan does not constrain both channels");

  Calibration cal;
  cal.source = CalibrationSource::FittedFromBlankScan;
  cal.eta_h = h.weighted ? h.swxy / h.swxx : h.sxy / h.sxx;
  cal.eta_v = v.weighted ? v.swxy / v.swxx : v.sxy / v.sxx;

  CalibrationFit fit;
  fit.points = scan.size();
  double ss_h = 0, ss_v = 0, noise_h = 0, noise_v = 0;
  for (const auto& pt : scan) {
    const Projection proj = projection_coefficients(pt.theta_in);
    ss_h += std::pow(pt.fraction_h - cal.eta_h * proj.transmittance, 2);
    ss_v += std::pow(pt.fraction_v - cal.eta_v * proj.reflectance, 2);
    noise_h += pt.stderr_h * pt.stderr_h;
    noise_v += pt.stderr_v * pt.stderr_v;
  }
  const double n = static_cast<double>(scan.size());
  fit.residual_rms_h = std::sqrt(ss_h / n);
  fit.residual_rms_v = std::sqrt(ss_v / n);
  fit.noise_rms_h = std::sqrt(noise_h / n);
  fit.noise_rms_v = std::sqrt(noise_v / n);
  fit.stderr_h = h.weighted ? 1.0 / std::sqrt(h.swxx) : std::sqrt(ss_h / (n - 1.0) / h.sxx);
  fit.stderr_v = v.weighted ? 1.0 / std::sqrt(v.swxx) : std::sqrt(ss_v / (n - 1.0) / v.sxx);
  cal.fit = fit;
  return cal;
}

Calibration calibrate_efficiencies(std::span<const BlankScanPoint> scan) {
  std::vector<BlankScanSummary> summaries;
  summaries.reserve(scan.size());
  for (const auto& pt : scan) summaries.push_back(summarize(pt));
  return calibrate_efficiencies(std::span<const BlankScanSummary>(summaries));
}

}  // namespace qpol
