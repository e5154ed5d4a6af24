#pragma once

// Locale-free, round-trip-exact numeric text conversion. All file formats in
// this project go through these helpers so that serialize/deserialize is
// bit-exact and output bytes are deterministic.

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace survkit {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);
std::string format_int(long long value);

// Strict parsers: the whole field must be consumed. "nan"/"inf" parse as
// non-finite doubles (callers decide whether those are acceptable).
std::optional<double> parse_double(std::string_view field);
std::optional<long long> parse_int(std::string_view field);

std::string_view trim(std::string_view s);

// Splits one CSV line on commas. The defined file formats never need quoting.
std::vector<std::string_view> split_csv_line(std::string_view line);

}  // namespace survkit
