#include "commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "config.hpp"
#include "qpol/budget.hpp"
#include "qpol/counts_io.hpp"
#include "qpol/errors.hpp"
#include "qpol/text_table.hpp"

#ifndef QPOL_VERSION
#define QPOL_VERSION "0.0.0"
#endif

namespace qpol::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Values given on the command line; each one overrides the matching config field.
struct Flags {
  std::string config;
  std::string out;
  unsigned workers = 1;
  bool verbose = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> label;
  std::optional<std::string> regime;
  std::optional<double> eta_h, eta_v, r_pe, concentration, mean_photons, branch_offset;
  std::optional<std::uint64_t> nu, mu;
  std::optional<std::string> estimator, grid, counts, budget, scheme, table, study;
};

json& at_path(json& doc, std::initializer_list<const char*> path) {
  json* node = &doc;
  for (const char* key : path) {
    if (!node->is_object()) *node = json::object();
    node = &(*node)[key];
  }
  return *node;
}

template <typename T>
void override_field(json& doc, const std::optional<T>& value, std::initializer_list<const char*> path) {
  if (value) at_path(doc, path) = *value;
}

json apply_flags(json doc, const std::string& sub, const Flags& f) {
  if (!doc.is_object()) throw ConfigError("", "config document must be a JSON object");
  override_field(doc, f.seed, {"seed"});
  override_field(doc, f.label, {"label"});
  override_field(doc, f.regime, {"probe", "regime"});
  override_field(doc, f.eta_h, {"probe", "eta_h"});
  override_field(doc, f.eta_v, {"probe", "eta_v"});
  override_field(doc, f.nu, {"probe", "nu"});
  override_field(doc, f.mu, {"probe", "mu"});
  override_field(doc, f.mean_photons, {"probe", "mean_photons"});
  override_field(doc, f.concentration, {"sample", "concentration"});
  if (sub == "simulate") {
    override_field(doc, f.r_pe, {"probe", "r_pe"});
    override_field(doc, f.estimator, {"campaign", "estimator"});
    override_field(doc, f.grid, {"campaign", "theta_in_grid_deg"});
    override_field(doc, f.branch_offset, {"campaign", "branch_offset_deg"});
  } else if (sub == "estimate") {
    override_field(doc, f.counts, {"estimate", "counts"});
    override_field(doc, f.budget, {"estimate", "budget"});
    override_field(doc, f.estimator, {"estimate", "estimator"});
    override_field(doc, f.branch_offset, {"estimate", "branch_offset_deg"});
  } else if (sub == "fisher") {
    override_field(doc, f.scheme, {"fisher", "scheme"});
    override_field(doc, f.regime, {"fisher", "regime"});
    override_field(doc, f.estimator, {"fisher", "estimator"});
    override_field(doc, f.grid, {"fisher", "grid_deg"});
  } else if (sub == "budget") {
    override_field(doc, f.table, {"budget", "table"});
  } else if (sub == "mc") {
    override_field(doc, f.study, {"mc", "study"});
    override_field(doc, f.estimator, {"mc", "estimator"});
    const bool validate = f.study ? *f.study == "validate"
                                  : doc.contains("mc") && doc["mc"].is_object() && doc["mc"].value("study", "") == "validate";
    if (validate) {
      override_field(doc, f.r_pe, {"probe", "r_pe"});
      override_field(doc, f.grid, {"mc", "theta_out_deg"});
    } else {
      if (f.r_pe) at_path(doc, {"mc", "leakages"}) = *f.r_pe > 0 ? json{0.0, *f.r_pe} : json{0.0};
      override_field(doc, f.grid, {"mc", "grid_deg"});
    }
  }
  return doc;
}

// Output bundle of one run: directory, provenance and the resolved config.
class Run {
 public:
  Run(RunConfig cfg, const Flags& flags, std::ostream& out, std::ostream& err)
      : cfg_(std::move(cfg)), out_(out), err_(err), verbose_(flags.verbose), dir_(flags.out) {
    resolved_ = to_json(cfg_);
    meta_.tool_version = QPOL_VERSION;
    meta_.config_hash = config_hash(resolved_);
    meta_.master_seed = cfg_.seed;
    meta_.label = cfg_.label;
    options_.workers = flags.workers ? flags.workers : std::max(1u, std::thread::hardware_concurrency());
    fs::create_directories(dir_);
    json doc = resolved_;
    doc["tool_version"] = meta_.tool_version;
    write("config.resolved.json", doc.dump(2) + "\n");
  }

  const RunConfig& config() const { return cfg_; }
  const ReportMetadata& meta() const { return meta_; }
  const RunOptions& options() const { return options_; }
  std::ostream& out() { return out_; }

  void log(const std::string& msg) {
    if (verbose_) err_ << "qpol: " << msg << '\n';
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path path = dir_ / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << content;
    if (!f) throw std::runtime_error("write failed for '" + path.string() + "'");
    log("wrote " + path.string());
  }

  std::string header_line() const {
    std::string line = "# qpol " + meta_.tool_version + " config_sha256=" + meta_.config_hash +
                       " master_seed=" + std::to_string(meta_.master_seed);
    if (!meta_.label.empty()) line += " label=" + meta_.label;
    return line + "\n";
  }

  json metadata(const std::string& kind) const {
    return {{"tool_version", meta_.tool_version},
            {"config_hash", meta_.config_hash},
            {"master_seed", meta_.master_seed},
            {"label", meta_.label},
            {"kind", kind}};
  }

 private:
  RunConfig cfg_;
  std::ostream& out_;
  std::ostream& err_;
  bool verbose_;
  fs::path dir_;
  json resolved_;
  ReportMetadata meta_;
  RunOptions options_;
};

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string fmt(double x) { return text::format_number(x); }

ChiralSample chiral_sample(const SampleSection& s) {
  ChiralSample c;
  c.concentration = s.concentration.value_or(0.0);
  c.path_length_dm = s.path_length_dm;
  c.transitions = s.lab_transitions();
  return c;
}

SampleGeometry geometry(const SampleSection& s) { return {s.path_length_dm, s.wavelength_nm, s.lab_transitions()}; }

int cmd_simulate(Run& run) {
  const RunConfig& cfg = run.config();
  CampaignSpec spec;
  spec.probe = cfg.probe;
  spec.sample = chiral_sample(cfg.sample);
  spec.wavelength_nm = cfg.sample.wavelength_nm;
  spec.theta_in_grid_deg = cfg.campaign.theta_in_grid_deg;
  spec.estimator = cfg.campaign.estimator;
  spec.master_seed = cfg.seed;
  spec.label = cfg.label;
  spec.branch_offset_deg = cfg.campaign.branch_offset_deg;

  RunOptions options = run.options();
  options.keep_records = true;
  run.log("simulating " + std::to_string(spec.theta_in_grid_deg.size()) + " grid points");
  CampaignResult result = run_campaign(spec, options);

  std::ostringstream csv;
  write_campaign_csv(csv, result, run.meta());
  run.write("campaign.csv", csv.str());
  run.write("campaign.json", campaign_json(result, run.meta()));

  std::vector<CountRow> counts;
  for (const auto& row : result.rows) {
    for (std::size_t i = 0; i < row.records.size(); ++i) counts.push_back({row.theta_in_deg, i, row.records[i]});
  }
  std::ostringstream counts_csv;
  counts_csv << run.header_line();
  write_counts_csv(counts_csv, counts);
  run.write("counts.csv", counts_csv.str());

  std::size_t used = 0;
  double sum = 0.0;
  for (const auto& row : result.rows) {
    if (row.estimate.excluded || !std::isfinite(row.empirical_uncertainty_deg)) continue;
    sum += row.empirical_uncertainty_deg;
    ++used;
  }
  run.out() << "simulate: " << result.rows.size() << " grid points, alpha_true=" << fmt(result.alpha_true_deg)
            << " deg, mean dtheta_out over " << used << " non-excluded points = "
            << (used ? fmt(sum / static_cast<double>(used)) : "nan") << " deg\n";
  return kExitOk;
}

int cmd_estimate(Run& run) {
  const RunConfig& cfg = run.config();
  std::vector<CountRow> rows;
  {
    std::ifstream in(cfg.estimate.counts);
    if (!in) throw ConfigError("estimate.counts", "cannot open '" + cfg.estimate.counts + "'");
    try {
      rows = read_counts_csv(in, cfg.probe.regime);
    } catch (const DomainError& ex) {
      throw ConfigError("estimate.counts", std::string("'") + cfg.estimate.counts + "': " + ex.what());
    }
  }
  if (rows.empty()) throw ConfigError("estimate.counts", "no count rows in '" + cfg.estimate.counts + "'");

  std::optional<BudgetSummary> budget;
  std::vector<BudgetEntry> entries;
  if (cfg.estimate.budget) {
    std::ifstream in(*cfg.estimate.budget);
    if (!in) throw ConfigError("estimate.budget", "cannot open '" + *cfg.estimate.budget + "'");
    try {
      entries = read_budget_csv(in);
    } catch (const DomainError& ex) {
      throw ConfigError("estimate.budget", std::string("'") + *cfg.estimate.budget + "': " + ex.what());
    }
    budget = combine_budget(entries);
  }

  const Calibration cal = Calibration::configured(cfg.probe.eta_h, cfg.probe.eta_v);
  const SampleGeometry geo = geometry(cfg.sample);
  double offset = 0.0;
  if (cfg.estimate.branch_offset_deg) {
    offset = *cfg.estimate.branch_offset_deg;
  } else if (cfg.sample.concentration) {
    offset = rotation_angle_deg(chiral_sample(cfg.sample), cfg.sample.wavelength_nm);
  }

  std::ostringstream csv;
  csv << run.header_line();
  csv << "theta_in_deg,estimator,theta_out_mean_deg,theta_out_std_deg,alpha_deg,concentration_g_per_ml,"
         "concentration_std_g_per_ml,excluded,region_excluded,trials_used,trials_dropped\n";
  json doc;
  doc["metadata"] = run.metadata("estimate");
  doc["rows"] = json::array();
  for (const auto& [theta_in, records] : group_by_angle(rows)) {
    EstimateOptions opts;
    opts.branch_hint = PolarizationAngle::from_degrees(theta_in + offset);
    const Estimate e = estimate_concentration(records, cfg.estimate.estimator, cal,
                                              PolarizationAngle::from_degrees(theta_in), geo, opts);
    csv << fmt(theta_in) << ',' << to_string(e.kind) << ',' << fmt(e.theta_out_mean_deg) << ','
        << fmt(e.theta_out_std_deg) << ',' << fmt(e.alpha_deg) << ',' << fmt(e.concentration) << ','
        << fmt(e.concentration_std) << ',' << (e.excluded ? 1 : 0) << ',' << (e.region_excluded ? 1 : 0) << ','
        << e.trials_used << ',' << e.trials_dropped << '\n';
    doc["rows"].push_back({{"theta_in_deg", theta_in},
                           {"estimator", to_string(e.kind)},
                           {"theta_out_mean_deg", num(e.theta_out_mean_deg)},
                           {"theta_out_std_deg", num(e.theta_out_std_deg)},
                           {"alpha_deg", num(e.alpha_deg)},
                           {"concentration_g_per_ml", num(e.concentration)},
                           {"concentration_std_g_per_ml", num(e.concentration_std)},
                           {"excluded", e.excluded},
                           {"region_excluded", e.region_excluded},
                           {"trials_used", e.trials_used},
                           {"trials_dropped", e.trials_dropped}});
  }
  if (budget) {
    json b = json::array();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      b.push_back({{"source", entries[i].source}, {"std_g_per_ml", budget->row_std[i]}});
    }
    doc["budget"] = {{"rows", b}, {"total_g_per_ml", budget->total}};
    csv << "# budget_total_g_per_ml=" << fmt(budget->total) << '\n';
    std::ostringstream bcsv;
    bcsv << run.header_line();
    write_budget_csv(bcsv, entries, *budget);
    run.write("budget.csv", bcsv.str());
  }
  run.write("estimates.csv", csv.str());
  run.write("estimates.json", doc.dump(2) + "\n");
  run.out() << "estimate: " << doc["rows"].size() << " datasets";
  if (budget) run.out() << ", budget total " << fmt(budget->total) << " g/ml";
  run.out() << '\n';
  return kExitOk;
}

int cmd_fisher(Run& run) {
  const RunConfig& cfg = run.config();
  const FisherSection& fs_ = cfg.fisher;
  std::optional<EstimatorKind> kind = fs_.estimator;
  if (!kind && fs_.scheme == Scheme::SingleModeH) kind = EstimatorKind::Single;
  if (!kind && fs_.scheme == Scheme::TwoMode) kind = EstimatorKind::Dsr;
  const double nu = static_cast<double>(cfg.probe.nu);
  const double photons = fs_.regime == Regime::Quantum ? 1.0 : cfg.probe.mean_photons;

  std::vector<FisherReport> rows;
  for (double deg : fs_.grid_deg) {
    const auto theta = PolarizationAngle::from_degrees(deg);
    FisherReport r;
    try {
      if (kind) {
        r = fisher_report(*kind, fs_.scheme, fs_.regime, theta, cfg.probe.eta_h, cfg.probe.eta_v, nu,
                          cfg.probe.mean_photons);
      } else {
        r.scheme = fs_.scheme;
        r.regime = fs_.regime;
        r.theta_out_deg = deg;
        r.transmittance = projection_coefficients(theta).transmittance;
        r.fi_closed = fi_closed(fs_.scheme, fs_.regime, theta, cfg.probe.eta_h, cfg.probe.eta_v, photons);
        r.fi_numeric = fi_numeric(outcome_family(fs_.scheme, fs_.regime, cfg.probe.eta_h, cfg.probe.eta_v, photons),
                                  theta.radians());
        r.fi_campaign = nu * r.fi_closed;
        r.cr_bound = 1.0 / std::sqrt(r.fi_campaign);
        r.lep_value = r.saturation_gap = NAN;
      }
    } catch (const SingularPoint&) {
      r.scheme = fs_.scheme;
      r.regime = fs_.regime;
      r.kind = kind.value_or(EstimatorKind::Single);
      r.theta_out_deg = deg;
      r.transmittance = projection_coefficients(theta).transmittance;
      r.fi_closed = r.fi_numeric = r.fi_campaign = r.cr_bound = r.lep_value = r.saturation_gap = NAN;
    }
    rows.push_back(r);
  }

  std::ostringstream csv;
  csv << run.header_line();
  write_fisher_csv(csv, rows);
  run.write("fisher.csv", csv.str());

  json doc;
  doc["metadata"] = run.metadata("fisher");
  doc["metadata"]["estimator"] = kind ? json(to_string(*kind)) : json(nullptr);
  doc["rows"] = json::array();
  double max_gap = 0.0;
  for (const auto& r : rows) {
    doc["rows"].push_back({{"theta_out_deg", r.theta_out_deg},
                           {"transmittance", r.transmittance},
                           {"fi_closed_per_herald", num(r.fi_closed)},
                           {"fi_numeric_per_herald", num(r.fi_numeric)},
                           {"fi_campaign", num(r.fi_campaign)},
                           {"cr_bound_rad", num(r.cr_bound)},
                           {"lep_rad", num(r.lep_value)},
                           {"saturation_gap", num(r.saturation_gap)}});
    if (std::isfinite(r.saturation_gap)) max_gap = std::max(max_gap, std::abs(r.saturation_gap));
  }
  run.write("fisher.json", doc.dump(2) + "\n");
  run.out() << "fisher: " << rows.size() << " angles, scheme " << to_string(fs_.scheme);
  if (kind) run.out() << ", estimator " << to_string(*kind) << ", max |gap| = " << fmt(max_gap);
  run.out() << '\n';
  return kExitOk;
}

int cmd_budget(Run& run) {
  const RunConfig& cfg = run.config();
  std::ifstream in(cfg.budget.table);
  if (!in) throw ConfigError("budget.table", "cannot open '" + cfg.budget.table + "'");
  std::vector<BudgetEntry> entries;
  try {
    entries = read_budget_csv(in);
  } catch (const DomainError& ex) {
    throw ConfigError("budget.table", std::string("'") + cfg.budget.table + "': " + ex.what());
  }
  const BudgetSummary summary = combine_budget(entries);

  std::ostringstream csv;
  csv << run.header_line();
  write_budget_csv(csv, entries, summary);
  run.write("budget.csv", csv.str());

  json doc;
  doc["metadata"] = run.metadata("budget");
  doc["rows"] = json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    doc["rows"].push_back({{"source", e.source},
                           {"value", e.value},
                           {"unit", e.unit},
                           {"divisor", e.divisor},
                           {"distribution", to_string(e.distribution)},
                           {"sensitivity", e.sensitivity ? json(*e.sensitivity) : json(nullptr)},
                           {"std_g_per_ml", summary.row_std[i]}});
  }
  doc["total_g_per_ml"] = summary.total;
  run.write("budget.json", doc.dump(2) + "\n");

  for (std::size_t i = 0; i < entries.size(); ++i) {
    run.out() << entries[i].source << "  " << fmt(summary.row_std[i]) << " g/ml\n";
  }
  run.out() << "total  " << fmt(summary.total) << " g/ml\n";
  return kExitOk;
}

int cmd_mc(Run& run) {
  const RunConfig& cfg = run.config();
  const McSection& mc = cfg.mc;
  if (mc.study == Study::PeBias) {
    BiasStudySpec spec;
    spec.probe = cfg.probe;
    spec.geometry = geometry(cfg.sample);
    spec.estimator = mc.estimator;
    spec.concentrations = mc.concentrations;
    spec.leakages = mc.leakages;
    spec.grid_deg = mc.grid_deg;
    spec.parameterization = mc.parameterization;
    spec.master_seed = cfg.seed;
    const auto rows = pe_bias_study(spec, run.options());
    std::ostringstream csv;
    write_bias_csv(csv, rows, run.meta());
    run.write("pe_bias.csv", csv.str());
    run.write("pe_bias.json", bias_json(rows, run.meta()));
    run.out() << "mc pe-bias: " << rows.size() << " rows\n";
    return kExitOk;
  }

  ValidationSpec spec;
  spec.theta_out_deg = mc.theta_out_deg;
  spec.efficiencies = mc.efficiencies;
  spec.kinds = mc.kinds;
  spec.regimes = mc.regimes;
  spec.nu = cfg.probe.nu;
  spec.mu = cfg.probe.mu;
  spec.r_pe = cfg.probe.r_pe;
  spec.mean_photons = cfg.probe.mean_photons;
  spec.master_seed = cfg.seed;
  spec.z_threshold = mc.z_threshold;
  if (spec.mu < 2000) run.log("mu < 2000: z-scores rest on a noisy standard-deviation estimate");
  const auto report = validate_closed_forms(spec, lep_uncertainty, run.options());
  std::ostringstream csv;
  write_validation_csv(csv, report, run.meta());
  run.write("validation.csv", csv.str());
  run.write("validation.json", validation_json(report, run.meta()));
  run.out() << "mc validate: " << report.passed << '/' << report.evaluated << " cells pass at z <= "
            << fmt(spec.z_threshold) << '\n';
  return kExitOk;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("-c,--config", f.config, "JSON run configuration");
  sub->add_option("-o,--out", f.out, "output directory")->required();
  sub->add_option("--seed", f.seed, "master seed");
  sub->add_option("--label", f.label, "free-text label stored with the outputs");
  sub->add_option("--workers", f.workers, "worker threads (0 = all cores)");
  sub->add_flag("-v,--verbose", f.verbose, "progress messages on stderr");
}

void add_probe(CLI::App* sub, Flags& f) {
  sub->add_option("--regime", f.regime, "quantum or classical");
  sub->add_option("--eta-h", f.eta_h, "H-channel efficiency");
  sub->add_option("--eta-v", f.eta_v, "V-channel efficiency");
  sub->add_option("--nu", f.nu, "heralds per trial");
  sub->add_option("--mu", f.mu, "trials per campaign");
  sub->add_option("--mean-photons", f.mean_photons, "coherent-state mean photon number");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Photon-counting polarimetry: simulation, estimation and precision analysis", "qpol"};
  app.set_version_flag("--version", std::string("qpol ") + QPOL_VERSION);
  app.require_subcommand(1);
  Flags f;

  auto* sim = app.add_subcommand("simulate", "simulate a concentration campaign over an input-angle grid");
  add_common(sim, f);
  add_probe(sim, f);
  sim->add_option("--rpe", f.r_pe, "PBS leakage probability");
  sim->add_option("--concentration", f.concentration, "sucrose concentration, g/ml");
  sim->add_option("--estimator", f.estimator, "single, diff or dsr");
  sim->add_option("--grid", f.grid, "theta_in grid start:stop:step in degrees");
  sim->add_option("--branch-offset", f.branch_offset, "expected rotation used to pick the angle branch, deg");

  auto* est = app.add_subcommand("estimate", "estimate concentrations from a counts file");
  add_common(est, f);
  add_probe(est, f);
  est->add_option("--counts", f.counts, "counts file (theta_in_deg,trial_index,n_h,n_v,nu)");
  est->add_option("--budget", f.budget, "uncertainty budget table to combine");
  est->add_option("--estimator", f.estimator, "single, diff or dsr");
  est->add_option("--concentration", f.concentration, "expected concentration, g/ml (branch selection)");
  est->add_option("--branch-offset", f.branch_offset, "expected rotation used to pick the angle branch, deg");

  auto* fis = app.add_subcommand("fisher", "Fisher information and Cramer-Rao saturation table");
  add_common(fis, f);
  add_probe(fis, f);
  fis->add_option("--scheme", f.scheme, "single, single-v or two");
  fis->add_option("--estimator", f.estimator, "estimator whose uncertainty is compared with the bound");
  fis->add_option("--grid", f.grid, "theta_out grid start:stop:step in degrees");

  auto* bud = app.add_subcommand("budget", "combine an uncertainty budget table");
  add_common(bud, f);
  bud->add_option("--table", f.table, "budget table (source,value,unit,divisor,distribution,sensitivity[,std])");

  auto* mcs = app.add_subcommand("mc", "Monte-Carlo studies: pe-bias or validate");
  add_common(mcs, f);
  add_probe(mcs, f);
  mcs->add_option("--study", f.study, "pe-bias or validate");
  mcs->add_option("--rpe", f.r_pe, "PBS leakage probability");
  mcs->add_option("--estimator", f.estimator, "estimator for the pe-bias study");
  mcs->add_option("--grid", f.grid, "angle grid start:stop:step in degrees");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string sub = chosen->get_name();
  try {
    json doc = f.config.empty() ? json::object() : load_config_file(f.config);
    const RunConfig cfg = resolve_config(apply_flags(std::move(doc), sub, f), sub);
    Run run(cfg, f, out, err);
    if (sub == "simulate") return cmd_simulate(run);
    if (sub == "estimate") return cmd_estimate(run);
    if (sub == "fisher") return cmd_fisher(run);
    if (sub == "budget") return cmd_budget(run);
    return cmd_mc(run);
  } catch (const ConfigError& ex) {
    err << "qpol " << sub << ": config error: " << ex.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& ex) {
    err << "qpol " << sub << ": error: " << ex.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace qpol::cli
