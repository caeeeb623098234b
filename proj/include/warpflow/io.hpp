#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "warpflow/common.hpp"

namespace warpflow {

// Insertion-ordered JSON keeps report key order fixed, which together with
// nlohmann's shortest-roundtrip double formatting makes reruns byte-identical.
using json = nlohmann::ordered_json;

/// Format a double with 17 significant digits (lossless round trip).
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Write named columns as CSV. All columns must have equal length.
inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                      const std::vector<std::span<const double>>& cols) {
    if (names.size() != cols.size()) throw numerical_error("write_csv: header/column mismatch");
    const std::size_t n = cols.empty() ? 0 : cols.front().size();
    for (const auto& c : cols)
        if (c.size() != n) throw numerical_error("write_csv: ragged columns");
    std::ofstream out(path);
    if (!out) throw numerical_error("write_csv: cannot open " + path.string());
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
    out << "\n";
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) out << (j ? "," : "") << fmt17(cols[j][i]);
        out << "\n";
    }
}

struct CsvTable {
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;

    std::span<const double> col(const std::string& name) const {
        for (std::size_t j = 0; j < names.size(); ++j)
            if (names[j] == name) return cols[j];
        throw numerical_error("csv column not found: " + name);
    }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw numerical_error("read_csv: cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw numerical_error("read_csv: empty file " + path.string());
    std::size_t pos = 0;
    while (pos <= line.size()) {
        const std::size_t c = line.find(',', pos);
        t.names.push_back(line.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
        if (c == std::string::npos) break;
        pos = c + 1;
    }
    t.cols.resize(t.names.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t p = 0;
        for (std::size_t j = 0; j < t.names.size(); ++j) {
            const std::size_t c = line.find(',', p);
            t.cols[j].push_back(std::stod(line.substr(p, c == std::string::npos ? std::string::npos : c - p)));
            p = (c == std::string::npos) ? line.size() + 1 : c + 1;
        }
    }
    return t;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw numerical_error("write_json: cannot open " + path.string());
    out << j.dump(2) << "\n";
}

} // namespace warpflow
