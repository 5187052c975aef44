#include "qpol/text_table.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace qpol::text {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw std::invalid_argument("unterminated quoted field");
  out.push_back(trim(cur));
  return out;
}

std::string quote_field(std::string_view field, char delim) {
  const bool needs = field.find(delim) != std::string_view::npos || field.find('"') != std::string_view::npos ||
                     (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

double parse_double(std::string_view s) {
  const std::string t = trim(s);
  if (t.empty()) throw std::invalid_argument("empty numeric field");
  std::size_t pos = 0;
  const double v = std::stod(t, &pos);
  if (pos != t.size()) throw std::invalid_argument("trailing characters in numeric field '" + t + "'");
  return v;
}

unsigned long long parse_uint(std::string_view s) {
  const std::string t = trim(s);
  unsigned long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
    throw std::invalid_argument("expected a nonnegative integer, got '" + t + "'");
  }
  return v;
}

}  // namespace qpol::text
