#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace facade::text {

/// Splits on any run of spaces/tabs/CR.
std::vector<std::string_view> split_whitespace(std::string_view line);

/// Splits on a single delimiter, keeping empty fields.
std::vector<std::string_view> split(std::string_view line, char delim);

std::string_view trim(std::string_view s);

/// Strict parses: the whole token must be consumed.
std::optional<double> parse_double(std::string_view token);
std::optional<std::int64_t> parse_int(std::string_view token);

/// Fixed-point with `decimals` digits, never "-0.000000".
std::string fixed(double value, int decimals);

/// Shortest decimal string that parses back to the same double.
std::string shortest(double value);

} // namespace facade::text
