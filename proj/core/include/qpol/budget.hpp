#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qpol {

enum class Distribution { Normal, Rectangular };

std::string_view to_string(Distribution d);

/// Divisor turning a half-width or standard value into a standard uncertainty:
/// 1 for Normal, sqrt(3) for Rectangular.
double default_divisor(Distribution d);

/// One row of a type A / type B uncertainty budget on the concentration.
struct BudgetEntry {
  std::string source;
  double value = 0.0;
  std::string unit;
  double divisor = 1.0;
  Distribution distribution = Distribution::Normal;
  std::optional<double> sensitivity;  // (g/ml) per unit of `value`

  /// value / divisor * sensitivity in g/ml. Throws UnitMismatch without a sensitivity.
  double standard_uncertainty() const;
};

struct BudgetSummary {
  std::vector<double> row_std;  // g/ml, aligned with the input entries
  double total = 0.0;           // root-sum-square, g/ml
};

/// Independent entries combined in quadrature. Throws DomainError on an empty
/// budget and UnitMismatch on an entry without a sensitivity.
BudgetSummary combine_budget(std::span<const BudgetEntry> entries);

/// Delimited budget table with header
///   source,value,unit,divisor,distribution,sensitivity,std
/// Lines starting with '#' are comments. `std` is optional on input; when
/// present it must match value/divisor*sensitivity to the precision written.
/// Throws DomainError naming the offending line.
std::vector<BudgetEntry> read_budget_csv(std::istream& in);

void write_budget_csv(std::ostream& out, std::span<const BudgetEntry> entries, const BudgetSummary& summary);

}  // namespace qpol
