#include "qpol/counts_io.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include "qpol/errors.hpp"
#include "qpol/text_table.hpp"

namespace qpol {

namespace {
const std::vector<std::string> kHeader{"theta_in_deg", "trial_index", "n_h", "n_v", "nu"};
}

std::vector<CountRow> read_counts_csv(std::istream& in, Regime regime) {
  std::vector<CountRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = text::split_csv_line(t);
    const std::string where = "counts row " + std::to_string(line_no) + ": ";
    if (!header_seen) {
      if (fields != kHeader) throw DomainError(where + "header must be theta_in_deg,trial_index,n_h,n_v,nu");
      header_seen = true;
      continue;
    }
    if (fields.size() != kHeader.size()) throw DomainError(where + "expected 5 fields");
    CountRow row;
    try {
      row.theta_in_deg = text::parse_double(fields[0]);
      row.trial_index = text::parse_uint(fields[1]);
      row.record.n_h = text::parse_uint(fields[2]);
      row.record.n_v = text::parse_uint(fields[3]);
      row.record.nu = text::parse_uint(fields[4]);
    } catch (const std::exception& ex) {
      throw DomainError(where + ex.what());
    }
    if (row.record.nu == 0) throw DomainError(where + "nu must be >= 1");
    if (regime == Regime::Quantum && row.record.n_h + row.record.n_v > row.record.nu) {
      throw DomainError(where + "n_h + n_v exceeds nu");
    }
    rows.push_back(row);
  }
  if (!header_seen) throw DomainError("counts file has no header");
  return rows;
}

void write_counts_csv(std::ostream& out, std::span<const CountRow> rows) {
  out << "theta_in_deg,trial_index,n_h,n_v,nu\n";
  for (const auto& r : rows) {
    out << text::format_number(r.theta_in_deg) << ',' << r.trial_index << ',' << r.record.n_h << ','
        << r.record.n_v << ',' << r.record.nu << '\n';
  }
}

std::map<double, std::vector<CountRecord>> group_by_angle(std::span<const CountRow> rows) {
  std::vector<CountRow> sorted(rows.begin(), rows.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const CountRow& a, const CountRow& b) {
    return a.theta_in_deg != b.theta_in_deg ? a.theta_in_deg < b.theta_in_deg : a.trial_index < b.trial_index;
  });
  std::map<double, std::vector<CountRecord>> out;
  for (const auto& r : sorted) out[r.theta_in_deg].push_back(r.record);
  return out;
}

}  // namespace qpol
