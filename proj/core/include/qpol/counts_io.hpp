#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "qpol/photostats.hpp"

namespace qpol {

/// One row of a counts file: theta_in_deg,trial_index,n_h,n_v,nu
struct CountRow {
  double theta_in_deg = 0.0;
  std::uint64_t trial_index = 0;
  CountRecord record;
};

/// Parse a counts file. '#' lines are comments; the first other line must be
/// the header. With `regime == Quantum`, rows with n_h + n_v > nu are rejected.
/// Throws DomainError naming the 1-based line number of the offending row.
std::vector<CountRow> read_counts_csv(std::istream& in, Regime regime);

void write_counts_csv(std::ostream& out, std::span<const CountRow> rows);

/// Group rows by input angle (ascending), trials ordered by trial_index.
std::map<double, std::vector<CountRecord>> group_by_angle(std::span<const CountRow> rows);

}  // namespace qpol
