#pragma once

// Plain-text key/value configuration.
//
//   # comment
//   key = value
//   section.0.key = 1 2 3      (dotted keys express nesting)
//
// Keys are unique; later duplicates are an error. Whitespace around keys and
// values is trimmed. Lists are whitespace- or comma-separated.

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "geneval/error.hpp"

namespace geneval {

namespace detail {
inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}
}  // namespace detail

class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>") {
        KeyValueConfig cfg;
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) {
                line = line.substr(0, hash);
            }
            line = detail::trim(line);
            if (line.empty()) {
                continue;
            }
            const auto eq = line.find('=');
            require(eq != std::string::npos,
                    origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string value = detail::trim(line.substr(eq + 1));
            require(!key.empty(), origin + ":" + std::to_string(line_no) + ": empty key");
            require(cfg.values_.count(key) == 0, origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static KeyValueConfig load(const std::string& path) {
        std::ifstream in(path);
        require(static_cast<bool>(in), "cannot open config file '" + path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse(buf.str(), path);
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }

    [[nodiscard]] const std::string& raw(const std::string& key) const {
        const auto it = values_.find(key);
        require(it != values_.end(), "missing config key '" + key + "'");
        return it->second;
    }

    [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const {
        return has(key) ? raw(key) : fallback;
    }

    [[nodiscard]] double get_double(const std::string& key) const { return to_double(key, raw(key)); }
    [[nodiscard]] double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    [[nodiscard]] std::uint64_t get_uint(const std::string& key) const { return to_uint(key, raw(key)); }
    [[nodiscard]] std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
        return has(key) ? get_uint(key) : fallback;
    }

    [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) {
            return fallback;
        }
        const std::string& v = raw(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") {
            return true;
        }
        if (v == "false" || v == "0" || v == "no" || v == "off") {
            return false;
        }
        throw Error("config key '" + key + "': expected a boolean, got '" + v + "'");
    }

    [[nodiscard]] std::vector<double> get_doubles(const std::string& key) const {
        std::vector<double> out;
        for (const auto& tok : tokens(raw(key))) {
            out.push_back(to_double(key, tok));
        }
        return out;
    }
    [[nodiscard]] std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
        return has(key) ? get_doubles(key) : fallback;
    }

    [[nodiscard]] std::vector<std::uint64_t> get_uints(const std::string& key) const {
        std::vector<std::uint64_t> out;
        for (const auto& tok : tokens(raw(key))) {
            out.push_back(to_uint(key, tok));
        }
        return out;
    }
    [[nodiscard]] std::vector<std::uint64_t> get_uints(const std::string& key,
                                                       std::vector<std::uint64_t> fallback) const {
        return has(key) ? get_uints(key) : fallback;
    }

    /// Rejects keys outside `allowed` (a trailing '*' in an allowed entry matches any suffix).
    void check_keys(const std::set<std::string>& allowed) const {
        for (const auto& [key, value] : values_) {
            bool ok = allowed.count(key) != 0;
            for (const auto& pattern : allowed) {
                if (!ok && !pattern.empty() && pattern.back() == '*' &&
                    key.compare(0, pattern.size() - 1, pattern, 0, pattern.size() - 1) == 0) {
                    ok = true;
                }
            }
            require(ok, "unknown config key '" + key + "'");
        }
    }

    [[nodiscard]] const std::map<std::string, std::string>& entries() const { return values_; }

    [[nodiscard]] std::string to_string() const {
        std::ostringstream out;
        for (const auto& [key, value] : values_) {
            out << key << " = " << value << '\n';
        }
        return out.str();
    }

private:
    static std::vector<std::string> tokens(const std::string& value) {
        std::string normalized = value;
        for (char& c : normalized) {
            if (c == ',') {
                c = ' ';
            }
        }
        std::istringstream in(normalized);
        std::vector<std::string> out;
        std::string tok;
        while (in >> tok) {
            out.push_back(tok);
        }
        return out;
    }

    static double to_double(const std::string& key, const std::string& text) {
        try {
            std::size_t used = 0;
            const double v = std::stod(text, &used);
            if (used == text.size()) {
                return v;
            }
        } catch (const std::exception&) {
        }
        throw Error("config key '" + key + "': expected a number, got '" + text + "'");
    }

    static std::uint64_t to_uint(const std::string& key, const std::string& text) {
        try {
            std::size_t used = 0;
            if (!text.empty() && text.front() != '-') {
                const auto v = std::stoull(text, &used);
                if (used == text.size()) {
                    return v;
                }
            }
        } catch (const std::exception&) {
        }
        throw Error("config key '" + key + "': expected a nonnegative integer, got '" + text + "'");
    }

    std::map<std::string, std::string> values_;
};

}  // namespace geneval
