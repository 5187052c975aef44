#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qpol/estimators.hpp"
#include "qpol/optics.hpp"
#include "qpol/photostats.hpp"
#include "qpol/uncertainty.hpp"

namespace qpol {

struct RunOptions {
  unsigned workers = 1;       // grid cells evaluated concurrently
  bool keep_records = false;  // retain raw counts in the result
};

/// Input-angle scan of one sample with one estimator.
struct CampaignSpec {
  ProbeConfig probe;
  ChiralSample sample;
  double wavelength_nm = 809.6;
  std::vector<double> theta_in_grid_deg;
  EstimatorKind estimator = EstimatorKind::Dsr;
  std::uint64_t master_seed = 0;
  std::string label;
  /// Added to theta_in to form the branch hint; defaults to the nominal rotation.
  std::optional<double> branch_offset_deg;

  void validate() const;
};

struct CampaignRow {
  double theta_in_deg = 0.0;
  double theta_out_true_deg = 0.0;
  Estimate estimate;
  double empirical_uncertainty_deg = 0.0;  // = estimate.theta_out_std_deg
  double analytic_uncertainty_deg = 0.0;   // closed form at the true angle; NaN if singular
  double enhancement = 0.0;                // closed-form classical/quantum ratio; NaN if singular
  double predicted_bias_deg = 0.0;         // first-order leakage shift of theta_out; NaN if singular
  double predicted_concentration = 0.0;    // C + predicted_bias / ([alpha] l)
  bool model_excluded = false;             // 3-sigma rule at the true angle
  std::string error;                       // non-empty if this cell failed
  std::vector<CountRecord> records;        // only with RunOptions::keep_records
};

struct CampaignResult {
  CampaignSpec spec;
  double alpha_true_deg = 0.0;
  double specific_rotation = 0.0;
  std::vector<CampaignRow> rows;  // aligned 1:1 with spec.theta_in_grid_deg
};

/// Grid cell i draws from seed derive_seed(master_seed, i); results do not
/// depend on `options.workers`.
CampaignResult run_campaign(const CampaignSpec& spec, const RunOptions& options = {});

/// Leakage study around theta_out ~ 0 (input or output angle parameterization).
enum class BiasGrid { InputAngle, OutputAngle };

struct BiasStudySpec {
  ProbeConfig probe;  // r_pe is overridden by `leakages`
  SampleGeometry geometry;
  EstimatorKind estimator = EstimatorKind::Dsr;
  std::vector<double> concentrations{0.1, 0.3, 0.5};
  std::vector<double> leakages{0.0, 1e-3};
  std::vector<double> grid_deg{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  BiasGrid parameterization = BiasGrid::InputAngle;
  std::uint64_t master_seed = 0;
};

struct BiasRow {
  double concentration = 0.0;
  double r_pe = 0.0;
  double theta_in_deg = 0.0;
  double theta_out_true_deg = 0.0;
  Estimate estimate;
  double concentration_stderr = 0.0;   // standard error of the trial mean
  double bias_theta_deg = 0.0;         // estimated - true theta_out
  double predicted_bias_deg = 0.0;     // r_pe cot(2 theta_out); NaN at T in {0, 1}
  double predicted_concentration = 0.0;  // first order
  double exact_concentration = 0.0;    // from the exact leaky transmittance, no sampling
  bool model_excluded = false;
};

std::vector<BiasRow> pe_bias_study(const BiasStudySpec& spec, const RunOptions& options = {});

/// Grid for the empirical check of the closed-form uncertainties.
struct ValidationSpec {
  std::vector<double> theta_out_deg;
  std::vector<std::pair<double, double>> efficiencies;  // (eta_h, eta_v)
  std::vector<EstimatorKind> kinds{EstimatorKind::Single, EstimatorKind::Diff, EstimatorKind::Dsr};
  std::vector<Regime> regimes{Regime::Quantum};
  std::uint64_t nu = 10000;
  std::uint64_t mu = 2000;
  double r_pe = 0.0;
  double mean_photons = 1.0;
  std::uint64_t master_seed = 0;
  double z_threshold = 4.0;
};

using AnalyticForm = std::function<double(const UncertaintyContext&)>;

struct ValidationCell {
  EstimatorKind kind = EstimatorKind::Dsr;
  Regime regime = Regime::Quantum;
  double theta_out_deg = 0.0;
  double eta_h = 0.0;
  double eta_v = 0.0;
  double empirical = 0.0;  // radians
  double analytic = 0.0;   // radians
  double std_error = 0.0;  // sampling error of the empirical standard deviation
  double z = 0.0;
  std::size_t trials_used = 0;
  bool skipped = false;    // excluded region or singular closed form
  bool pass = false;
};

struct ValidationReport {
  std::vector<ValidationCell> cells;
  std::size_t evaluated = 0;
  std::size_t passed = 0;
  double pass_rate() const { return evaluated ? static_cast<double>(passed) / evaluated : 0.0; }
};

/// z = |empirical - analytic| / (analytic / sqrt(2 (mu - 1))); a cell passes at
/// z <= z_threshold. With r_pe > 0 the first-order leakage correction is added
/// to the analytic value (quantum regime).
ValidationReport validate_closed_forms(const ValidationSpec& spec, const AnalyticForm& analytic = lep_uncertainty,
                                       const RunOptions& options = {});

/// Population standard deviation (radians) of per-trial inverted angles for one
/// cell, with the true angle as branch hint. Trials that cannot be inverted are
/// skipped; `used` receives the number kept.
double empirical_theta_spread(const ProbeConfig& probe, EstimatorKind kind, PolarizationAngle theta_out,
                              std::uint64_t seed, std::size_t* used = nullptr);

/// Provenance embedded in every serialized result.
struct ReportMetadata {
  std::string tool_version;
  std::string config_hash;
  std::uint64_t master_seed = 0;
  std::string label;
};

void write_campaign_csv(std::ostream& out, const CampaignResult& result, const ReportMetadata& meta);
std::string campaign_json(const CampaignResult& result, const ReportMetadata& meta);

void write_bias_csv(std::ostream& out, std::span<const BiasRow> rows, const ReportMetadata& meta);
std::string bias_json(std::span<const BiasRow> rows, const ReportMetadata& meta);

void write_validation_csv(std::ostream& out, const ValidationReport& report, const ReportMetadata& meta);
std::string validation_json(const ValidationReport& report, const ReportMetadata& meta);

/// Run fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

}  // namespace qpol
