#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qpol/estimators.hpp"
#include "qpol/fisher.hpp"
#include "qpol/montecarlo.hpp"

namespace qpol::cli {

/// Invalid or incomplete run configuration; `field` is the dotted JSON path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct SampleSection {
  std::optional<double> concentration;
  double path_length_dm = 0.1;
  double wavelength_nm = 809.6;
  std::vector<DrudeTransition> transitions{kSucroseTransition};
  /// -1 when lab angles run opposite to the rotation of the medium.
  int rotation_sense = 1;
  /// Transitions with the amplitude sign folded in.
  std::vector<DrudeTransition> lab_transitions() const;
};

struct CampaignSection {
  EstimatorKind estimator = EstimatorKind::Dsr;
  std::vector<double> theta_in_grid_deg;  // defaults to -100..100 step 10
  std::optional<double> branch_offset_deg;
};

struct EstimateSection {
  std::string counts;
  std::optional<std::string> budget;
  EstimatorKind estimator = EstimatorKind::Dsr;
  std::optional<double> branch_offset_deg;
};

struct FisherSection {
  Scheme scheme = Scheme::SingleModeH;
  Regime regime = Regime::Quantum;
  std::optional<EstimatorKind> estimator;
  std::vector<double> grid_deg;  // theta_out
};

struct BudgetSection {
  std::string table;
};

enum class Study { PeBias, Validate };

struct McSection {
  Study study = Study::PeBias;
  // pe-bias
  EstimatorKind estimator = EstimatorKind::Dsr;
  std::vector<double> concentrations{0.1, 0.3, 0.5};
  std::vector<double> leakages{0.0, 1e-3};
  std::vector<double> grid_deg{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  BiasGrid parameterization = BiasGrid::InputAngle;
  // validate
  std::vector<double> theta_out_deg;
  std::vector<std::pair<double, double>> efficiencies;
  std::vector<EstimatorKind> kinds{EstimatorKind::Single, EstimatorKind::Diff, EstimatorKind::Dsr};
  std::vector<Regime> regimes{Regime::Quantum};
  double z_threshold = 4.0;
};

/// Fully resolved parameters of one subcommand run.
struct RunConfig {
  std::string subcommand;
  std::string label;
  std::uint64_t seed = 0;
  ProbeConfig probe;
  SampleSection sample;
  CampaignSection campaign;
  EstimateSection estimate;
  FisherSection fisher;
  BudgetSection budget;
  McSection mc;
};

/// Parse and validate the sections `subcommand` needs. Unknown keys, wrong
/// types and missing required fields raise ConfigError with the field path.
RunConfig resolve_config(const nlohmann::json& doc, const std::string& subcommand);

/// Canonical JSON of the resolved parameters (sorted keys, all defaults explicit).
/// Feeding it back to resolve_config yields the same RunConfig.
nlohmann::json to_json(const RunConfig& config);

/// Hex SHA-256 of the compact canonical JSON.
std::string config_hash(const nlohmann::json& resolved);

/// "a:b:s" -> a, a+s, ..., b (inclusive, step > 0).
std::vector<double> parse_grid(const std::string& spec);

nlohmann::json load_config_file(const std::string& path);

}  // namespace qpol::cli
