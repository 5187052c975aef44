#include "qpol/montecarlo.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "json.hpp"
#include "qpol/errors.hpp"
#include "qpol/rng.hpp"
#include "qpol/text_table.hpp"

namespace qpol {

namespace {

using nlohmann::json;

std::string_view regime_name(Regime r) { return r == Regime::Quantum ? "quantum" : "classical"; }

// NaN and infinities become JSON null.
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json metadata_json(const ReportMetadata& meta) {
  return {{"tool_version", meta.tool_version},
          {"config_hash", meta.config_hash},
          {"master_seed", meta.master_seed},
          {"label", meta.label}};
}

void write_metadata_line(std::ostream& out, const ReportMetadata& meta) {
  out << "# qpol " << meta.tool_version << " config_sha256=" << meta.config_hash << " master_seed=" << meta.master_seed;
  if (!meta.label.empty()) out << " label=" << meta.label;
  out << '\n';
}

json estimate_json(const Estimate& e) {
  return {{"estimator", to_string(e.kind)},
          {"theta_out_mean_deg", num(e.theta_out_mean_deg)},
          {"theta_out_std_deg", num(e.theta_out_std_deg)},
          {"alpha_deg", num(e.alpha_deg)},
          {"concentration_g_per_ml", num(e.concentration)},
          {"concentration_std_g_per_ml", num(e.concentration_std)},
          {"excluded", e.excluded},
          {"region_excluded", e.region_excluded},
          {"trials_used", e.trials_used},
          {"trials_dropped", e.trials_dropped}};
}

double analytic_or_nan(const std::function<double()>& fn) {
  try {
    return fn();
  } catch (const SingularPoint&) {
    return NAN;
  } catch (const ZeroSlope&) {
    return NAN;
  }
}

Estimate failed_estimate(EstimatorKind kind) {
  Estimate e;
  e.kind = kind;
  e.theta_out_mean_deg = e.theta_out_std_deg = e.alpha_deg = NAN;
  e.concentration = e.concentration_std = NAN;
  e.excluded = true;
  return e;
}

// Concentration implied by the exact leaky transmittance (no sampling noise).
double exact_leaky_concentration(PolarizationAngle theta_out, double r_pe, PolarizationAngle theta_in,
                                 PolarizationAngle hint, double rot_times_length) {
  const double t = effective_transmittance(projection_coefficients(theta_out).transmittance, r_pe);
  const PolarizationAngle est = resolve_branch(std::acos(std::sqrt(t)), hint);
  return (est.degrees() - theta_in.degrees()) / rot_times_length;
}

}  // namespace

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  for (unsigned w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void CampaignSpec::validate() const {
  probe.validate();
  sample.validate();
  if (theta_in_grid_deg.empty()) throw DomainError("theta_in grid is empty");
  if (probe.mu < 2) throw DomainError("mu must be >= 2 for a spread estimate");
  specific_rotation(wavelength_nm, sample.transitions);
}

CampaignResult run_campaign(const CampaignSpec& spec, const RunOptions& options) {
  spec.validate();
  CampaignResult result;
  result.spec = spec;
  result.specific_rotation = specific_rotation(spec.wavelength_nm, spec.sample.transitions);
  result.alpha_true_deg = rotation_angle_deg(spec.sample, spec.wavelength_nm);
  result.rows.resize(spec.theta_in_grid_deg.size());

  const Calibration cal = Calibration::configured(spec.probe.eta_h, spec.probe.eta_v);
  const SampleGeometry geometry{spec.sample.path_length_dm, spec.wavelength_nm, spec.sample.transitions};
  const double offset = spec.branch_offset_deg.value_or(result.alpha_true_deg);
  const double rot_l = result.specific_rotation * spec.sample.path_length_dm;

  parallel_for(result.rows.size(), options.workers, [&](std::size_t i) {
    CampaignRow& row = result.rows[i];
    row.theta_in_deg = spec.theta_in_grid_deg[i];
    row.theta_out_true_deg = row.theta_in_deg + result.alpha_true_deg;
    const auto theta_in = PolarizationAngle::from_degrees(row.theta_in_deg);
    const auto theta_out = PolarizationAngle::from_degrees(row.theta_out_true_deg);

    const UncertaintyContext ctx{spec.estimator, spec.probe.regime, theta_out, spec.probe.eta_h,
                                 spec.probe.eta_v, static_cast<double>(spec.probe.nu), spec.probe.mean_photons};
    row.analytic_uncertainty_deg = analytic_or_nan([&] { return lep_uncertainty(ctx) / kDegree; });
    row.enhancement = analytic_or_nan(
        [&] { return quantum_enhancement(spec.estimator, theta_out, spec.probe.eta_h, spec.probe.eta_v); });
    row.predicted_bias_deg = analytic_or_nan([&] {
      return pe_bias(spec.estimator, theta_out, spec.probe.eta_h, spec.probe.eta_v, spec.probe.r_pe,
                     static_cast<double>(spec.probe.nu))
                 .bias_theta /
             kDegree;
    });
    row.predicted_concentration = spec.sample.concentration + row.predicted_bias_deg / rot_l;
    row.model_excluded = exclusion_check(theta_out, cal, spec.probe.nu);

    try {
      auto records = sample_campaign(spec.probe, theta_out, derive_seed(spec.master_seed, i));
      EstimateOptions opts;
      opts.branch_hint = PolarizationAngle::from_degrees(row.theta_in_deg + offset);
      row.estimate = estimate_concentration(records, spec.estimator, cal, theta_in, geometry, opts);
      if (options.keep_records) row.records = std::move(records);
    } catch (const Error& ex) {
      row.estimate = failed_estimate(spec.estimator);
      row.error = ex.what();
    }
    row.empirical_uncertainty_deg = row.estimate.theta_out_std_deg;
  });
  return result;
}

std::vector<BiasRow> pe_bias_study(const BiasStudySpec& spec, const RunOptions& options) {
  spec.probe.validate();
  if (spec.probe.mu < 2) throw DomainError("mu must be >= 2 for a spread estimate");
  if (spec.concentrations.empty() || spec.leakages.empty() || spec.grid_deg.empty()) {
    throw DomainError("bias study needs concentrations, leakages and grid points");
  }
  const double rot = specific_rotation(spec.geometry.wavelength_nm, spec.geometry.transitions);
  const double rot_l = rot * spec.geometry.path_length_dm;
  const Calibration cal = Calibration::configured(spec.probe.eta_h, spec.probe.eta_v);

  const std::size_t per_c = spec.leakages.size() * spec.grid_deg.size();
  std::vector<BiasRow> rows(spec.concentrations.size() * per_c);

  parallel_for(rows.size(), options.workers, [&](std::size_t i) {
    BiasRow& row = rows[i];
    const std::size_t ci = i / per_c;
    const std::size_t li = (i % per_c) / spec.grid_deg.size();
    const std::size_t gi = i % spec.grid_deg.size();
    row.concentration = spec.concentrations[ci];
    row.r_pe = spec.leakages[li];
    const double alpha = rot_l * row.concentration;
    if (spec.parameterization == BiasGrid::InputAngle) {
      row.theta_in_deg = spec.grid_deg[gi];
      row.theta_out_true_deg = row.theta_in_deg + alpha;
    } else {
      row.theta_out_true_deg = spec.grid_deg[gi];
      row.theta_in_deg = row.theta_out_true_deg - alpha;
    }
    const auto theta_in = PolarizationAngle::from_degrees(row.theta_in_deg);
    const auto theta_out = PolarizationAngle::from_degrees(row.theta_out_true_deg);
    const auto hint = theta_out;

    ProbeConfig probe = spec.probe;
    probe.r_pe = row.r_pe;
    // Leaky and ideal runs at the same (C, angle) share a seed so their difference isolates the leakage.
    const std::uint64_t seed = derive_seed(spec.master_seed, ci * spec.grid_deg.size() + gi);
    try {
      const auto records = sample_campaign(probe, theta_out, seed);
      EstimateOptions opts;
      opts.branch_hint = hint;
      row.estimate = estimate_concentration(records, spec.estimator, cal, theta_in, spec.geometry, opts);
    } catch (const Error&) {
      row.estimate = failed_estimate(spec.estimator);
    }
    row.concentration_stderr =
        row.estimate.trials_used > 0 ? row.estimate.concentration_std / std::sqrt(row.estimate.trials_used) : NAN;
    row.bias_theta_deg = row.estimate.theta_out_mean_deg - row.theta_out_true_deg;
    row.predicted_bias_deg = analytic_or_nan([&] {
      return pe_bias(spec.estimator, theta_out, probe.eta_h, probe.eta_v, row.r_pe, static_cast<double>(probe.nu))
                 .bias_theta /
             kDegree;
    });
    row.predicted_concentration = row.concentration + row.predicted_bias_deg / rot_l;
    row.exact_concentration = exact_leaky_concentration(theta_out, row.r_pe, theta_in, hint, rot_l);
    row.model_excluded = exclusion_check(theta_out, cal, probe.nu);
  });
  return rows;
}

double empirical_theta_spread(const ProbeConfig& probe, EstimatorKind kind, PolarizationAngle theta_out,
                              std::uint64_t seed, std::size_t* used) {
  const Calibration cal = Calibration::configured(probe.eta_h, probe.eta_v);
  const auto records = sample_campaign(probe, theta_out, seed);
  std::vector<double> thetas;
  thetas.reserve(records.size());
  for (const auto& rec : records) {
    try {
      thetas.push_back(invert_to_theta(outcome_value(rec, kind), kind, cal, theta_out).radians());
    } catch (const EmptyDenominator&) {
    } catch (const UnphysicalStatistic&) {
    }
  }
  if (used) *used = thetas.size();
  if (thetas.size() < 2) return NAN;
  double mean = 0.0;
  for (double t : thetas) mean += t;
  mean /= static_cast<double>(thetas.size());
  double ss = 0.0;
  for (double t : thetas) ss += (t - mean) * (t - mean);
  return std::sqrt(ss / static_cast<double>(thetas.size()));
}

ValidationReport validate_closed_forms(const ValidationSpec& spec, const AnalyticForm& analytic,
                                       const RunOptions& options) {
  if (spec.mu < 2) throw DomainError("validation needs mu >= 2");
  ValidationReport report;
  for (auto regime : spec.regimes)
    for (auto kind : spec.kinds)
      for (auto [eh, ev] : spec.efficiencies)
        for (double deg : spec.theta_out_deg) {
          ValidationCell cell;
          cell.kind = kind;
          cell.regime = regime;
          cell.theta_out_deg = deg;
          cell.eta_h = eh;
          cell.eta_v = ev;
          report.cells.push_back(cell);
        }

  parallel_for(report.cells.size(), options.workers, [&](std::size_t i) {
    ValidationCell& cell = report.cells[i];
    const auto theta = PolarizationAngle::from_degrees(cell.theta_out_deg);
    const Calibration cal = Calibration::configured(cell.eta_h, cell.eta_v);
    if (exclusion_check(theta, cal, spec.nu)) {
      cell.skipped = true;
      return;
    }
    const UncertaintyContext ctx{cell.kind, cell.regime, theta, cell.eta_h, cell.eta_v,
                                 static_cast<double>(spec.nu), spec.mean_photons};
    try {
      cell.analytic = analytic(ctx);
      if (spec.r_pe > 0.0 && cell.regime == Regime::Quantum) {
        cell.analytic += pe_bias(cell.kind, theta, cell.eta_h, cell.eta_v, spec.r_pe, ctx.nu).bias_uncertainty;
      }
    } catch (const SingularPoint&) {
      cell.skipped = true;
      return;
    }
    ProbeConfig probe{cell.regime, cell.eta_h, cell.eta_v, spec.r_pe, spec.nu, spec.mu, spec.mean_photons};
    cell.empirical = empirical_theta_spread(probe, cell.kind, theta, derive_seed(spec.master_seed, i), &cell.trials_used);
    if (cell.trials_used < 2) {
      cell.skipped = true;
      return;
    }
    cell.std_error = cell.analytic / std::sqrt(2.0 * (static_cast<double>(cell.trials_used) - 1.0));
    cell.z = std::abs(cell.empirical - cell.analytic) / cell.std_error;
    cell.pass = cell.z <= spec.z_threshold;
  });

  for (const auto& c : report.cells) {
    if (c.skipped) continue;
    ++report.evaluated;
    if (c.pass) ++report.passed;
  }
  return report;
}

void write_campaign_csv(std::ostream& out, const CampaignResult& result, const ReportMetadata& meta) {
  write_metadata_line(out, meta);
  out << "theta_in_deg,theta_out_true_deg,theta_out_mean_deg,empirical_dtheta_deg,analytic_dtheta_deg,"
         "alpha_deg,concentration_g_per_ml,concentration_std_g_per_ml,excluded,model_excluded,trials_used,"
         "trials_dropped,enhancement,predicted_bias_deg,predicted_concentration_g_per_ml\n";
  for (const auto& r : result.rows) {
    const auto& e = r.estimate;
    out << text::format_number(r.theta_in_deg) << ',' << text::format_number(r.theta_out_true_deg) << ','
        << text::format_number(e.theta_out_mean_deg) << ',' << text::format_number(r.empirical_uncertainty_deg)
        << ',' << text::format_number(r.analytic_uncertainty_deg) << ',' << text::format_number(e.alpha_deg) << ','
        << text::format_number(e.concentration) << ',' << text::format_number(e.concentration_std) << ','
        << (e.excluded ? 1 : 0) << ',' << (r.model_excluded ? 1 : 0) << ',' << e.trials_used << ','
        << e.trials_dropped << ',' << text::format_number(r.enhancement) << ','
        << text::format_number(r.predicted_bias_deg) << ',' << text::format_number(r.predicted_concentration)
        << '\n';
  }
}

std::string campaign_json(const CampaignResult& result, const ReportMetadata& meta) {
  const auto& s = result.spec;
  json doc;
  doc["metadata"] = metadata_json(meta);
  doc["metadata"]["kind"] = "campaign";
  doc["metadata"]["regime"] = regime_name(s.probe.regime);
  doc["metadata"]["estimator"] = to_string(s.estimator);
  doc["metadata"]["alpha_true_deg"] = num(result.alpha_true_deg);
  doc["metadata"]["specific_rotation"] = num(result.specific_rotation);
  doc["rows"] = json::array();
  for (const auto& r : result.rows) {
    json row{{"theta_in_deg", r.theta_in_deg},
             {"theta_out_true_deg", r.theta_out_true_deg},
             {"estimate", estimate_json(r.estimate)},
             {"empirical_dtheta_deg", num(r.empirical_uncertainty_deg)},
             {"analytic_dtheta_deg", num(r.analytic_uncertainty_deg)},
             {"enhancement", num(r.enhancement)},
             {"predicted_bias_deg", num(r.predicted_bias_deg)},
             {"predicted_concentration_g_per_ml", num(r.predicted_concentration)},
             {"model_excluded", r.model_excluded}};
    if (!r.error.empty()) row["error"] = r.error;
    doc["rows"].push_back(std::move(row));
  }
  return doc.dump(2) + "\n";
}

void write_bias_csv(std::ostream& out, std::span<const BiasRow> rows, const ReportMetadata& meta) {
  write_metadata_line(out, meta);
  out << "concentration_true_g_per_ml,r_pe,theta_in_deg,theta_out_true_deg,concentration_est_g_per_ml,"
         "concentration_stderr_g_per_ml,bias_theta_deg,predicted_bias_deg,predicted_concentration_g_per_ml,"
         "exact_concentration_g_per_ml,excluded,model_excluded\n";
  for (const auto& r : rows) {
    out << text::format_number(r.concentration) << ',' << text::format_number(r.r_pe) << ','
        << text::format_number(r.theta_in_deg) << ',' << text::format_number(r.theta_out_true_deg) << ','
        << text::format_number(r.estimate.concentration) << ',' << text::format_number(r.concentration_stderr)
        << ',' << text::format_number(r.bias_theta_deg) << ',' << text::format_number(r.predicted_bias_deg) << ','
        << text::format_number(r.predicted_concentration) << ',' << text::format_number(r.exact_concentration)
        << ',' << (r.estimate.excluded ? 1 : 0) << ',' << (r.model_excluded ? 1 : 0) << '\n';
  }
}

std::string bias_json(std::span<const BiasRow> rows, const ReportMetadata& meta) {
  json doc;
  doc["metadata"] = metadata_json(meta);
  doc["metadata"]["kind"] = "pe-bias";
  doc["rows"] = json::array();
  for (const auto& r : rows) {
    doc["rows"].push_back({{"concentration_true_g_per_ml", r.concentration},
                           {"r_pe", r.r_pe},
                           {"theta_in_deg", r.theta_in_deg},
                           {"theta_out_true_deg", r.theta_out_true_deg},
                           {"estimate", estimate_json(r.estimate)},
                           {"concentration_stderr_g_per_ml", num(r.concentration_stderr)},
                           {"bias_theta_deg", num(r.bias_theta_deg)},
                           {"predicted_bias_deg", num(r.predicted_bias_deg)},
                           {"predicted_concentration_g_per_ml", num(r.predicted_concentration)},
                           {"exact_concentration_g_per_ml", num(r.exact_concentration)},
                           {"model_excluded", r.model_excluded}});
  }
  return doc.dump(2) + "\n";
}

void write_validation_csv(std::ostream& out, const ValidationReport& report, const ReportMetadata& meta) {
  write_metadata_line(out, meta);
  out << "estimator,regime,theta_out_deg,eta_h,eta_v,empirical_dtheta_rad,analytic_dtheta_rad,std_error_rad,z,"
         "trials_used,skipped,pass\n";
  for (const auto& c : report.cells) {
    out << to_string(c.kind) << ',' << regime_name(c.regime) << ',' << text::format_number(c.theta_out_deg) << ','
        << text::format_number(c.eta_h) << ',' << text::format_number(c.eta_v) << ','
        << text::format_number(c.empirical) << ',' << text::format_number(c.analytic) << ','
        << text::format_number(c.std_error) << ',' << text::format_number(c.z) << ',' << c.trials_used << ','
        << (c.skipped ? 1 : 0) << ',' << (c.pass ? 1 : 0) << '\n';
  }
}

std::string validation_json(const ValidationReport& report, const ReportMetadata& meta) {
  json doc;
  doc["metadata"] = metadata_json(meta);
  doc["metadata"]["kind"] = "validate";
  doc["metadata"]["evaluated"] = report.evaluated;
  doc["metadata"]["passed"] = report.passed;
  doc["rows"] = json::array();
  for (const auto& c : report.cells) {
    doc["rows"].push_back({{"estimator", to_string(c.kind)},
                           {"regime", regime_name(c.regime)},
                           {"theta_out_deg", c.theta_out_deg},
                           {"eta_h", c.eta_h},
                           {"eta_v", c.eta_v},
                           {"empirical_dtheta_rad", num(c.empirical)},
                           {"analytic_dtheta_rad", num(c.analytic)},
                           {"std_error_rad", num(c.std_error)},
                           {"z", num(c.z)},
                           {"trials_used", c.trials_used},
                           {"skipped", c.skipped},
                           {"pass", c.pass}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace qpol
