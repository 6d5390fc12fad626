#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ctv/common.hpp"

namespace ctv {

// The canonical formats never need quoting: multi-option cells are
// pipe-separated tokens, so a plain comma split is the whole grammar.

struct CsvRow {
    long line = 0;  // 1-based line number in the source
    std::vector<std::string> fields;
};

/// Reads all rows including the header. Blank lines are skipped, trailing
/// '\r' stripped.
inline std::vector<CsvRow> read_csv(std::istream& in) {
    std::vector<CsvRow> rows;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(CsvRow{lineno, split(line, ',')});
    }
    return rows;
}

inline std::vector<CsvRow> read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    return read_csv(in);
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << fields[i];
    }
    out << '\n';
}

/// key=value file, '#' comments and blank lines allowed.
inline std::map<std::string, std::string> read_kv_file(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto pos = t.find('=');
        if (pos == std::string::npos)
            throw Error(ErrorCode::MalformedRow, "expected key=value: " + t, lineno);
        kv[trim(t.substr(0, pos))] = trim(t.substr(pos + 1));
    }
    return kv;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << contents;
}

}  // namespace ctv
