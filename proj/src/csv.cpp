// SPDX-License-Identifier: Apache-2.0
#include "dot/csv.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace dot {

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, ptr);
}

double parse_double(std::string_view token) {
    double value = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw std::invalid_argument("parse_double: bad numeric token '" + std::string(token) + "'");
    }
    return value;
}

std::string format_optional(const std::optional<double>& value) {
    return value ? format_double(*value) : std::string();
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            fields.emplace_back(line.substr(start));
            break;
        }
        fields.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

void emit_csv(const std::string& header, const std::vector<std::string>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: no platform newline translation
    if (!out) throw IoError("emit_csv: cannot open '" + path + "' for writing");
    out << header << '\n';
    for (const std::string& row : rows) out << row << '\n';
    out.flush();
    if (!out) throw IoError("emit_csv: write to '" + path + "' failed");
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_csv: cannot open '" + path + "'");
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first) {
            table.header = split(line, ',');
            first = false;
        } else if (!line.empty()) {
            table.rows.push_back(split(line, ','));
        }
    }
    if (first) throw IoError("read_csv: '" + path + "' is empty");
    return table;
}

}  // namespace dot
