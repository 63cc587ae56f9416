#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "simelig/common.hpp"

namespace simelig {

// Strict delimited tables: comma separator, no quoting, optional "#..." schema
// version line ahead of the header. Every parse error carries file and line.

class CsvReader {
public:
    explicit CsvReader(const std::string& path, const std::string& expect_version = "")
        : path_(path), in_(path) {
        if (!in_) throw IoError("cannot open " + path);
        std::string line;
        if (!std::getline(in_, line)) throw IoError(path + ": empty file");
        ++line_no_;
        if (!line.empty() && line[0] == '#') {
            version_ = strip_cr(line);
            if (!std::getline(in_, line)) throw IoError(path + ": missing header row");
            ++line_no_;
        }
        if (!expect_version.empty() && version_ != expect_version)
            throw IoError(path + ": expected version line '" + expect_version +
                          "', found '" + version_ + "'");
        split(strip_cr(line), columns_);
        if (columns_.empty() || (columns_.size() == 1 && columns_[0].empty()))
            throw IoError(path + ": empty header row");
    }

    const std::vector<std::string>& columns() const { return columns_; }
    const std::string& version() const { return version_; }
    const std::string& path() const { return path_; }
    int line() const { return line_no_; }

    /// Reads the next data row into `cells`. Returns false at end of file.
    bool next(std::vector<std::string>& cells) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            line = strip_cr(line);
            if (line.empty()) continue;
            split(line, cells);
            if (cells.size() != columns_.size())
                throw IoError(path_ + ":" + std::to_string(line_no_) + ": expected " +
                              std::to_string(columns_.size()) + " fields, found " +
                              std::to_string(cells.size()));
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw IoError(path_ + ":" + std::to_string(line_no_) + ": " + msg);
    }

private:
    static std::string strip_cr(std::string s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
        return s;
    }

    static void split(const std::string& line, std::vector<std::string>& out) {
        out.clear();
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                out.emplace_back(line, start, i - start);
                start = i + 1;
            }
        }
    }

    std::string path_;
    std::ifstream in_;
    std::string version_;
    std::vector<std::string> columns_;
    int line_no_ = 0;
};

/// Maps declared column names to indices. Unknown columns are rejected,
/// missing required columns are named.
class ColumnMap {
public:
    ColumnMap(const CsvReader& reader, const std::vector<std::string>& required,
              const std::vector<std::string>& optional = {}) {
        const auto& cols = reader.columns();
        for (std::size_t i = 0; i < cols.size(); ++i) {
            bool known = false;
            for (const auto& r : required) known = known || r == cols[i];
            for (const auto& o : optional) known = known || o == cols[i];
            if (!known)
                throw IoError(reader.path() + ": unknown column '" + cols[i] + "'");
            index_[cols[i]] = static_cast<int>(i);
        }
        for (const auto& r : required)
            if (!index_.count(r))
                throw IoError(reader.path() + ": missing required column '" + r + "'");
    }

    int operator[](const std::string& name) const { return index_.at(name); }

    std::optional<int> find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::map<std::string, int> index_;
};

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& version_line,
              const std::vector<std::string>& columns)
        : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot write " + path);
        if (!version_line.empty()) out_ << version_line << "\n";
        write_row_strings(columns);
    }

    void write_row_strings(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    std::ostream& stream() { return out_; }

    void close() {
        out_.close();
        if (!out_) throw IoError("write failed for " + path_);
    }

private:
    std::string path_;
    std::ofstream out_;
};

/// Shortest decimal text that round-trips a double. Used for every floating
/// value we serialize so that re-running a stage reproduces identical bytes.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // Prefer the shortest representation that parses back exactly.
    for (int prec = 1; prec < 17; ++prec) {
        char probe[40];
        std::snprintf(probe, sizeof probe, "%.*g", prec, v);
        if (std::strtod(probe, nullptr) == v) return probe;
    }
    return buf;
}

inline double parse_double(const std::string& s, const CsvReader& reader,
                           const std::string& col) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || s.empty())
        reader.fail("column '" + col + "': bad number '" + s + "'");
    return v;
}

inline long long parse_int(const std::string& s, const CsvReader& reader,
                           const std::string& col) {
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || s.empty())
        reader.fail("column '" + col + "': bad integer '" + s + "'");
    return v;
}

inline bool parse_bool01(const std::string& s, const CsvReader& reader,
                         const std::string& col) {
    if (s == "0") return false;
    if (s == "1") return true;
    reader.fail("column '" + col + "': expected 0 or 1, found '" + s + "'");
}

} // namespace simelig
