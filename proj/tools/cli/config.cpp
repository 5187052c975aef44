#include "config.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qpol/errors.hpp"

namespace qpol::cli {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Strict view of one JSON object: typed getters and an unknown-key check.
class Section {
 public:
  Section(const json* obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (obj_ && !obj_->is_object()) throw ConfigError(path_, "expected an object");
  }

  bool present() const { return obj_ != nullptr; }
  const std::string& path() const { return path_; }
  std::string field(const std::string& key) const { return join(path_, key); }

  const json* find(const std::string& key) {
    seen_.insert(key);
    if (!obj_) return nullptr;
    auto it = obj_->find(key);
    if (it == obj_->end() || it->is_null()) return nullptr;
    return &*it;
  }

  std::optional<double> number(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) throw ConfigError(field(key), "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) throw ConfigError(field(key), "must be finite");
    return x;
  }

  std::optional<std::uint64_t> count(const std::string& key) {
    const auto x = number(key);
    if (!x) return std::nullopt;
    if (*x < 0 || std::floor(*x) != *x || *x > 9.0e15) {
      throw ConfigError(field(key), "expected a non-negative integer");
    }
    return static_cast<std::uint64_t>(*x);
  }

  std::optional<std::string> string(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) throw ConfigError(field(key), "expected a string");
    return v->get<std::string>();
  }

  double required_number(const std::string& key) {
    auto x = number(key);
    if (!x) throw ConfigError(field(key), "required field missing");
    return *x;
  }

  std::vector<double> grid(const std::string& key, std::vector<double> fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (v->is_string()) {
      try {
        return parse_grid(v->get<std::string>());
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(field(key), ex.what());
      }
    }
    if (!v->is_array() || v->empty()) throw ConfigError(field(key), "expected a nonempty array or \"start:stop:step\"");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto& e = (*v)[i];
      if (!e.is_number()) throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(e.get<double>());
    }
    return out;
  }

  Section child(const std::string& key) {
    const json* v = find(key);
    return Section(v, field(key));
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items()) {
      if (!seen_.count(key)) throw ConfigError(field(key), "unknown field");
    }
  }

 private:
  const json* obj_;
  std::string path_;
  std::set<std::string> seen_;
};

EstimatorKind parse_estimator(const std::string& s, const std::string& field) {
  if (s == "single") return EstimatorKind::Single;
  if (s == "diff") return EstimatorKind::Diff;
  if (s == "dsr") return EstimatorKind::Dsr;
  throw ConfigError(field, "unknown estimator '" + s + "' (single, diff, dsr)");
}

Regime parse_regime(const std::string& s, const std::string& field) {
  if (s == "quantum") return Regime::Quantum;
  if (s == "classical") return Regime::Classical;
  throw ConfigError(field, "unknown regime '" + s + "' (quantum, classical)");
}

Scheme parse_scheme(const std::string& s, const std::string& field) {
  if (s == "single" || s == "single-h") return Scheme::SingleModeH;
  if (s == "single-v") return Scheme::SingleModeV;
  if (s == "two" || s == "two-mode") return Scheme::TwoMode;
  throw ConfigError(field, "unknown scheme '" + s + "' (single, single-v, two)");
}

std::string regime_name(Regime r) { return r == Regime::Quantum ? "quantum" : "classical"; }

void read_probe(Section s, ProbeConfig& probe, bool need_efficiencies) {
  if (auto r = s.string("regime")) probe.regime = parse_regime(*r, s.field("regime"));
  auto eta_h = s.number("eta_h");
  auto eta_v = s.number("eta_v");
  if (need_efficiencies && !eta_h) throw ConfigError(s.field("eta_h"), "required field missing");
  if (need_efficiencies && !eta_v) throw ConfigError(s.field("eta_v"), "required field missing");
  if (eta_h) probe.eta_h = *eta_h;
  if (eta_v) probe.eta_v = *eta_v;
  if (auto x = s.number("r_pe")) probe.r_pe = *x;
  if (auto x = s.count("nu")) probe.nu = *x;
  if (auto x = s.count("mu")) probe.mu = *x;
  if (auto x = s.number("mean_photons")) probe.mean_photons = *x;
  s.finish();
  try {
    probe.validate();
  } catch (const DomainError& ex) {
    throw ConfigError(s.path(), ex.what());
  }
}

void read_sample(Section s, SampleSection& sample, bool need_concentration) {
  sample.concentration = s.number("concentration");
  if (need_concentration && !sample.concentration) {
    throw ConfigError(s.field("concentration"), "required field missing");
  }
  if (sample.concentration && *sample.concentration < 0) {
    throw ConfigError(s.field("concentration"), "must be >= 0");
  }
  if (auto x = s.number("path_length_dm")) sample.path_length_dm = *x;
  if (!(sample.path_length_dm > 0)) throw ConfigError(s.field("path_length_dm"), "must be > 0");
  if (auto x = s.number("wavelength_nm")) sample.wavelength_nm = *x;
  if (!(sample.wavelength_nm > 0)) throw ConfigError(s.field("wavelength_nm"), "must be > 0");
  if (const json* t = s.find("transitions")) {
    if (!t->is_array() || t->empty()) throw ConfigError(s.field("transitions"), "expected a nonempty array");
    sample.transitions.clear();
    for (std::size_t i = 0; i < t->size(); ++i) {
      Section e(&(*t)[i], s.field("transitions") + "[" + std::to_string(i) + "]");
      DrudeTransition d;
      d.amplitude = e.required_number("amplitude");
      d.resonance_nm = e.required_number("resonance_nm");
      e.finish();
      sample.transitions.push_back(d);
    }
  }
  if (auto x = s.number("rotation_sense")) {
    if (*x != 1.0 && *x != -1.0) throw ConfigError(s.field("rotation_sense"), "must be 1 or -1");
    sample.rotation_sense = static_cast<int>(*x);
  }
  s.finish();
  try {
    specific_rotation(sample.wavelength_nm, sample.transitions);
  } catch (const DomainError& ex) {
    throw ConfigError(s.field("wavelength_nm"), ex.what());
  }
}

json grid_json(const std::vector<double>& g) { return json(g); }

}  // namespace

std::vector<DrudeTransition> SampleSection::lab_transitions() const {
  auto out = transitions;
  for (auto& t : out) t.amplitude *= rotation_sense;
  return out;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument("junk");
    } catch (const std::exception&) {
      throw std::invalid_argument("bad grid '" + spec + "', expected start:stop:step");
    }
  }
  if (parts.size() != 3) throw std::invalid_argument("bad grid '" + spec + "', expected start:stop:step");
  const double a = parts[0], b = parts[1], step = parts[2];
  if (!(step > 0) || b < a) throw std::invalid_argument("grid '" + spec + "' needs step > 0 and stop >= start");
  const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9));
  std::vector<double> out;
  for (std::size_t i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
  return out;
}

RunConfig resolve_config(const json& doc, const std::string& subcommand) {
  Section root(&doc, "");
  RunConfig cfg;
  cfg.subcommand = subcommand;
  if (auto s = root.string("subcommand"); s && *s != subcommand) {
    throw ConfigError("subcommand", "config was resolved for '" + *s + "'");
  }
  if (auto s = root.string("label")) cfg.label = *s;
  if (auto s = root.count("seed")) cfg.seed = *s;
  root.find("tool_version");  // informational in resolved configs

  const bool is_sim = subcommand == "simulate";
  const bool is_est = subcommand == "estimate";
  const bool is_fisher = subcommand == "fisher";
  const bool is_mc = subcommand == "mc";

  read_probe(root.child("probe"), cfg.probe, is_sim || is_est || is_fisher);
  read_sample(root.child("sample"), cfg.sample, is_sim);

  {
    Section s = root.child("campaign");
    if (auto e = s.string("estimator")) cfg.campaign.estimator = parse_estimator(*e, s.field("estimator"));
    cfg.campaign.theta_in_grid_deg = s.grid("theta_in_grid_deg", parse_grid("-100:100:10"));
    cfg.campaign.branch_offset_deg = s.number("branch_offset_deg");
    s.finish();
    if (is_sim && cfg.probe.mu < 2) throw ConfigError("probe.mu", "must be >= 2 for a spread estimate");
  }
  {
    Section s = root.child("estimate");
    if (auto c = s.string("counts")) cfg.estimate.counts = *c;
    cfg.estimate.budget = s.string("budget");
    if (auto e = s.string("estimator")) cfg.estimate.estimator = parse_estimator(*e, s.field("estimator"));
    cfg.estimate.branch_offset_deg = s.number("branch_offset_deg");
    s.finish();
    if (is_est && cfg.estimate.counts.empty()) throw ConfigError("estimate.counts", "required field missing");
  }
  {
    Section s = root.child("fisher");
    if (auto x = s.string("scheme")) cfg.fisher.scheme = parse_scheme(*x, s.field("scheme"));
    if (auto x = s.string("regime")) {
      cfg.fisher.regime = parse_regime(*x, s.field("regime"));
    } else {
      cfg.fisher.regime = cfg.probe.regime;
    }
    if (auto x = s.string("estimator")) cfg.fisher.estimator = parse_estimator(*x, s.field("estimator"));
    cfg.fisher.grid_deg = s.grid("grid_deg", parse_grid("10:80:5"));
    s.finish();
    if (is_fisher && cfg.fisher.estimator) {
      try {
        check_pairing(*cfg.fisher.estimator, cfg.fisher.scheme);
      } catch (const DomainError& ex) {
        throw ConfigError("fisher.estimator", ex.what());
      }
    }
  }
  {
    Section s = root.child("budget");
    if (auto x = s.string("table")) cfg.budget.table = *x;
    s.finish();
    if (subcommand == "budget" && cfg.budget.table.empty()) throw ConfigError("budget.table", "required field missing");
  }
  {
    Section s = root.child("mc");
    McSection& mc = cfg.mc;
    if (auto x = s.string("study")) {
      if (*x == "pe-bias") {
        mc.study = Study::PeBias;
      } else if (*x == "validate") {
        mc.study = Study::Validate;
      } else {
        throw ConfigError(s.field("study"), "unknown study '" + *x + "' (pe-bias, validate)");
      }
    }
    if (auto x = s.string("estimator")) mc.estimator = parse_estimator(*x, s.field("estimator"));
    mc.concentrations = s.grid("concentrations", mc.concentrations);
    mc.leakages = s.grid("leakages", mc.leakages);
    mc.grid_deg = s.grid("grid_deg", mc.grid_deg);
    if (auto x = s.string("parameterization")) {
      if (*x == "theta_in") {
        mc.parameterization = BiasGrid::InputAngle;
      } else if (*x == "theta_out") {
        mc.parameterization = BiasGrid::OutputAngle;
      } else {
        throw ConfigError(s.field("parameterization"), "expected theta_in or theta_out");
      }
    }
    mc.theta_out_deg = s.grid("theta_out_deg", parse_grid("5:85:5"));
    if (const json* e = s.find("efficiencies")) {
      if (!e->is_array() || e->empty()) throw ConfigError(s.field("efficiencies"), "expected [[eta_h, eta_v], ...]");
      mc.efficiencies.clear();
      for (const auto& pair : *e) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
          throw ConfigError(s.field("efficiencies"), "expected [[eta_h, eta_v], ...]");
        }
        mc.efficiencies.emplace_back(pair[0].get<double>(), pair[1].get<double>());
      }
    } else {
      mc.efficiencies = {{cfg.probe.eta_h, cfg.probe.eta_v}};
    }
    if (const json* k = s.find("kinds")) {
      if (!k->is_array() || k->empty()) throw ConfigError(s.field("kinds"), "expected a nonempty array");
      mc.kinds.clear();
      for (const auto& v : *k) {
        if (!v.is_string()) throw ConfigError(s.field("kinds"), "expected estimator names");
        mc.kinds.push_back(parse_estimator(v.get<std::string>(), s.field("kinds")));
      }
    }
    if (const json* r = s.find("regimes")) {
      if (!r->is_array() || r->empty()) throw ConfigError(s.field("regimes"), "expected a nonempty array");
      mc.regimes.clear();
      for (const auto& v : *r) {
        if (!v.is_string()) throw ConfigError(s.field("regimes"), "expected regime names");
        mc.regimes.push_back(parse_regime(v.get<std::string>(), s.field("regimes")));
      }
    }
    if (auto x = s.number("z_threshold")) mc.z_threshold = *x;
    s.finish();
    if (is_mc) {
      for (double r : mc.leakages) {
        if (!(r >= 0 && r < 0.5)) throw ConfigError("mc.leakages", "each leakage must lie in [0, 0.5)");
      }
      for (double c : mc.concentrations) {
        if (!(c >= 0)) throw ConfigError("mc.concentrations", "must be >= 0");
      }
      if (cfg.probe.mu < 2) throw ConfigError("probe.mu", "must be >= 2 for a spread estimate");
    }
  }
  root.finish();
  return cfg;
}

json to_json(const RunConfig& c) {
  json doc;
  doc["subcommand"] = c.subcommand;
  doc["label"] = c.label;
  doc["seed"] = c.seed;
  doc["probe"] = {{"regime", regime_name(c.probe.regime)}, {"eta_h", c.probe.eta_h},
                  {"eta_v", c.probe.eta_v},                {"r_pe", c.probe.r_pe},
                  {"nu", c.probe.nu},                      {"mu", c.probe.mu},
                  {"mean_photons", c.probe.mean_photons}};
  json sample{{"path_length_dm", c.sample.path_length_dm},
              {"wavelength_nm", c.sample.wavelength_nm},
              {"rotation_sense", c.sample.rotation_sense}};
  if (c.sample.concentration) sample["concentration"] = *c.sample.concentration;
  sample["transitions"] = json::array();
  for (const auto& t : c.sample.transitions) {
    sample["transitions"].push_back({{"amplitude", t.amplitude}, {"resonance_nm", t.resonance_nm}});
  }
  doc["sample"] = sample;

  if (c.subcommand == "simulate") {
    json s{{"estimator", to_string(c.campaign.estimator)}, {"theta_in_grid_deg", grid_json(c.campaign.theta_in_grid_deg)}};
    if (c.campaign.branch_offset_deg) s["branch_offset_deg"] = *c.campaign.branch_offset_deg;
    doc["campaign"] = s;
  } else if (c.subcommand == "estimate") {
    json s{{"counts", c.estimate.counts}, {"estimator", to_string(c.estimate.estimator)}};
    if (c.estimate.budget) s["budget"] = *c.estimate.budget;
    if (c.estimate.branch_offset_deg) s["branch_offset_deg"] = *c.estimate.branch_offset_deg;
    doc["estimate"] = s;
  } else if (c.subcommand == "fisher") {
    json s{{"scheme", to_string(c.fisher.scheme)},
           {"regime", regime_name(c.fisher.regime)},
           {"grid_deg", grid_json(c.fisher.grid_deg)}};
    if (c.fisher.estimator) s["estimator"] = to_string(*c.fisher.estimator);
    doc["fisher"] = s;
  } else if (c.subcommand == "budget") {
    doc["budget"] = {{"table", c.budget.table}};
  } else if (c.subcommand == "mc") {
    const McSection& mc = c.mc;
    json s{{"study", mc.study == Study::PeBias ? "pe-bias" : "validate"}};
    if (mc.study == Study::PeBias) {
      s["estimator"] = to_string(mc.estimator);
      s["concentrations"] = mc.concentrations;
      s["leakages"] = mc.leakages;
      s["grid_deg"] = mc.grid_deg;
      s["parameterization"] = mc.parameterization == BiasGrid::InputAngle ? "theta_in" : "theta_out";
    } else {
      s["theta_out_deg"] = mc.theta_out_deg;
      s["efficiencies"] = json::array();
      for (auto [h, v] : mc.efficiencies) s["efficiencies"].push_back({h, v});
      s["kinds"] = json::array();
      for (auto k : mc.kinds) s["kinds"].push_back(to_string(k));
      s["regimes"] = json::array();
      for (auto r : mc.regimes) s["regimes"].push_back(regime_name(r));
      s["z_threshold"] = mc.z_threshold;
    }
    doc["mc"] = s;
  }
  return doc;
}

std::string config_hash(const json& resolved) {
  const std::string text = resolved.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& ex) {
    throw ConfigError("", "'" + path + "': " + ex.what());
  }
}

}  // namespace qpol::cli
