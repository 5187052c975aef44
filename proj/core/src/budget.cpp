#include "qpol/budget.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "qpol/errors.hpp"
#include "qpol/text_table.hpp"

namespace qpol {

namespace {

const std::vector<std::string> kColumns{"source", "value", "unit", "divisor", "distribution", "sensitivity", "std"};

Distribution parse_distribution(const std::string& s) {
  if (s == "N" || s == "normal" || s == "Normal") return Distribution::Normal;
  if (s == "R" || s == "rectangular" || s == "Rectangular") return Distribution::Rectangular;
  throw DomainError("unknown distribution '" + s + "' (expected N or R)");
}

// Number of decimals written in a numeric literal, for tolerance on the std column.
int decimals_of(const std::string& s) {
  const auto dot = s.find('.');
  if (dot == std::string::npos) return 0;
  const auto exp = s.find_first_of("eE");
  const std::size_t end = exp == std::string::npos ? s.size() : exp;
  return static_cast<int>(end - dot - 1);
}

}  // namespace

std::string_view to_string(Distribution d) { return d == Distribution::Normal ? "N" : "R"; }

double default_divisor(Distribution d) { return d == Distribution::Normal ? 1.0 : std::sqrt(3.0); }

double BudgetEntry::standard_uncertainty() const {
  if (!sensitivity) throw UnitMismatch("budget entry '" + source + "' has no sensitivity coefficient");
  if (!(divisor > 0.0)) throw DomainError("budget entry '" + source + "' needs a positive divisor");
  return std::abs(value / divisor * *sensitivity);
}

BudgetSummary combine_budget(std::span<const BudgetEntry> entries) {
  if (entries.empty()) throw DomainError("budget has no entries");
  BudgetSummary out;
  double ss = 0.0;
  for (const auto& e : entries) {
    const double u = e.standard_uncertainty();
    out.row_std.push_back(u);
    ss += u * u;
  }
  out.total = std::sqrt(ss);
  return out;
}

std::vector<BudgetEntry> read_budget_csv(std::istream& in) {
  std::vector<BudgetEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = text::split_csv_line(t);
    const auto where = "budget line " + std::to_string(line_no) + ": ";
    if (!header_seen) {
      if (fields.size() < 6 || fields.size() > 7) throw DomainError(where + "header must list 6 or 7 columns");
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] != kColumns[i]) throw DomainError(where + "expected column '" + kColumns[i] + "'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() < 6 || fields.size() > 7) throw DomainError(where + "expected 6 or 7 fields");
    if (fields[0] == "total" && fields[1].empty()) continue;  // summary row written by write_budget_csv
    try {
      BudgetEntry e;
      e.source = fields[0];
      e.value = text::parse_double(fields[1]);
      e.unit = fields[2];
      e.divisor = text::parse_double(fields[3]);
      e.distribution = parse_distribution(fields[4]);
      if (!fields[5].empty()) e.sensitivity = text::parse_double(fields[5]);
      if (!(e.divisor > 0.0)) throw DomainError("divisor must be > 0");
      if (fields.size() == 7 && !fields[6].empty() && e.sensitivity) {
        const double stated = text::parse_double(fields[6]);
        const double tol = 0.5 * std::pow(10.0, -decimals_of(fields[6])) * (1.0 + 1e-9);
        if (std::abs(stated - e.standard_uncertainty()) > tol) {
          throw DomainError("std column " + fields[6] + " disagrees with value/divisor*sensitivity = " +
                            text::format_number(e.standard_uncertainty()));
        }
      }
      entries.push_back(std::move(e));
    } catch (const UnitMismatch&) {
      throw;
    } catch (const std::exception& ex) {
      throw DomainError(where + ex.what());
    }
  }
  if (!header_seen) throw DomainError("budget table has no header");
  return entries;
}

void write_budget_csv(std::ostream& out, std::span<const BudgetEntry> entries, const BudgetSummary& summary) {
  out << "source,value,unit,divisor,distribution,sensitivity,std\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    out << text::quote_field(e.source) << ',' << text::format_number(e.value) << ',' << text::quote_field(e.unit)
        << ',' << text::format_number(e.divisor) << ',' << to_string(e.distribution) << ','
        << (e.sensitivity ? text::format_number(*e.sensitivity) : std::string()) << ','
        << text::format_number(summary.row_std.at(i)) << '\n';
  }
  out << "total,,g/ml,,,," << text::format_number(summary.total) << '\n';
}

}  // namespace qpol
