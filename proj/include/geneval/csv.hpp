#pragma once

// RFC-4180 style CSV: header row, '.' decimal separator, reals printed with
// 12 significant digits, fields quoted only when they need it.

#include <cstdio>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "geneval/error.hpp"

namespace geneval {

inline std::string format_real(double v) {
    if (v == 0.0) {
        return "0";  // no "-0"
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    std::string s(buf);
    if (s == "inf") {
        return "inf";
    }
    if (s == "-inf") {
        return "-inf";
    }
    return s;
}

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    class Row {
    public:
        explicit Row(CsvTable& table) : table_(table) {}
        ~Row() { table_.rows_.push_back(std::move(fields_)); }
        Row(const Row&) = delete;
        Row& operator=(const Row&) = delete;

        template <typename T>
        Row& operator<<(const T& value) {
            if constexpr (std::is_floating_point_v<T>) {
                fields_.push_back(format_real(static_cast<double>(value)));
            } else if constexpr (std::is_integral_v<T>) {
                fields_.push_back(std::to_string(value));
            } else {
                fields_.push_back(csv_escape(std::string(value)));
            }
            return *this;
        }

    private:
        CsvTable& table_;
        std::vector<std::string> fields_;
    };

    Row row() { return Row(*this); }

    [[nodiscard]] std::size_t size() const { return rows_.size(); }

    [[nodiscard]] std::string str() const {
        std::string out;
        auto emit = [&](const std::vector<std::string>& fields) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (i) {
                    out += ',';
                }
                out += fields[i];
            }
            out += "\r\n";
        };
        std::vector<std::string> escaped;
        for (const auto& h : header_) {
            escaped.push_back(csv_escape(h));
        }
        emit(escaped);
        for (const auto& r : rows_) {
            require(r.size() == header_.size(), "CsvTable: row width does not match header");
            emit(r);
        }
        return out;
    }

    /// Whitespace-separated variant for gnuplot: '#'-prefixed header, the
    /// `x_column` moved to the front, text fields double-quoted.
    [[nodiscard]] std::string gnuplot_str(std::size_t x_column = 0) const {
        require(x_column < header_.size(), "CsvTable: x column out of range");
        std::vector<std::size_t> order = {x_column};
        for (std::size_t i = 0; i < header_.size(); ++i) {
            if (i != x_column) {
                order.push_back(i);
            }
        }
        auto as_word = [](std::string f) {
            if (!f.empty() && f.front() == '"') {
                f = f.substr(1, f.size() - 2);
            }
            if (f.empty() || f.find_first_not_of("0123456789+-.eEinfa") != std::string::npos) {
                std::string q = "\"";
                for (char c : f) {
                    q += c == '"' ? '\'' : c;
                }
                return q + "\"";
            }
            return f;
        };
        std::string out = "#";
        for (std::size_t i : order) {
            out += ' ';
            out += header_[i];
        }
        out += '\n';
        for (const auto& r : rows_) {
            require(r.size() == header_.size(), "CsvTable: row width does not match header");
            for (std::size_t j = 0; j < order.size(); ++j) {
                if (j) {
                    out += '\t';
                }
                out += as_word(r[order[j]]);
            }
            out += '\n';
        }
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        require(static_cast<bool>(out), "cannot write '" + path + "'");
        out << str();
        require(static_cast<bool>(out), "failed writing '" + path + "'");
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace geneval
