#pragma once

// Minimal RFC 4180 field handling shared by the file readers and writers.

#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace msar::csv {

/// Splits one line. Quoted fields may contain commas and doubled quotes;
/// embedded newlines are not supported. Returns false on an unterminated quote.
bool split(std::string_view line, std::vector<std::string>& fields);

/// Quotes the field only when it contains a comma, quote or leading/trailing space.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

/// Strips a trailing '\r'.
inline std::string_view chomp(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

/// %.17g, which round-trips every double.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Throws ParseError naming `what` on a malformed number.
double parse_real(std::string_view text, std::string_view what);
long long parse_integer(std::string_view text, std::string_view what);

}  // namespace msar::csv
