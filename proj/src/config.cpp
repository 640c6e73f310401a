// SPDX-License-Identifier: Apache-2.0
#include "dot/config.hpp"

#include <fstream>
#include <sstream>

#include "dot/csv.hpp"

namespace dot {

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    std::size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str());
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value: '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(lineno));
        cfg.entries_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    if (key.empty()) throw ConfigError("config: empty key");
    entries_[key] = value;
}

void KeyValueConfig::set_entry(const std::string& entry) {
    const std::size_t eq = entry.find('=');
    if (eq == std::string::npos) throw ConfigError("config: override '" + entry + "' is not key=value");
    set(trim(entry.substr(0, eq)), trim(entry.substr(eq + 1)));
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        return parse_double(it->second);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' wants a number, got '" + it->second + "'");
    }
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const auto value = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return static_cast<std::size_t>(value);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' wants a nonnegative integer, got '" + it->second + "'");
    }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    return static_cast<std::uint64_t>(get_size(key, static_cast<std::size_t>(fallback)));
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: key '" + key + "' wants true/false, got '" + v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    if (it->second.empty()) return {};
    std::vector<double> values;
    for (const std::string& token : split(it->second, ',')) {
        try {
            values.push_back(parse_double(token));
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' has a bad number '" + token + "'");
        }
    }
    return values;
}

std::vector<std::size_t> KeyValueConfig::get_sizes(const std::string& key,
                                                   const std::vector<std::size_t>& fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    if (it->second.empty()) return {};
    std::vector<std::size_t> values;
    for (const std::string& token : split(it->second, ',')) {
        try {
            std::size_t pos = 0;
            values.push_back(static_cast<std::size_t>(std::stoull(token, &pos)));
            if (pos != token.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' has a bad integer '" + token + "'");
        }
    }
    return values;
}

std::string KeyValueConfig::serialize() const {
    std::ostringstream out;
    for (const auto& [key, value] : entries_) out << key << '=' << value << '\n';
    return out.str();
}

}  // namespace dot
