#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace qpol::text {

/// Shortest-round-trip-free, locale-independent rendering: "%.12g", "nan", "inf".
std::string format_number(double x);

/// Split one delimited line; supports double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line, char delim = ',');

/// Quote a field if it contains the delimiter, a quote or whitespace at the ends.
std::string quote_field(std::string_view field, char delim = ',');

std::string trim(std::string_view s);

/// Parse a full-string double; throws std::invalid_argument on trailing junk.
double parse_double(std::string_view s);
unsigned long long parse_uint(std::string_view s);

}  // namespace qpol::text
