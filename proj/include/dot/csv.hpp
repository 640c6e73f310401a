// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dot {

/// 17 significant digits, locale independent, round-trip exact for doubles.
std::string format_double(double value);

/// Strict parse of a whole token; throws on trailing garbage or empty input.
double parse_double(std::string_view token);

std::string format_optional(const std::optional<double>& value);  // empty cell when absent

std::vector<std::string> split(std::string_view line, char sep);

/// Header + rows, newline terminated. Throws IoError on failure.
void emit_csv(const std::string& header, const std::vector<std::string>& rows, const std::string& path);

/// Parses a CSV file back into header + field rows.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::string& path);

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dot
