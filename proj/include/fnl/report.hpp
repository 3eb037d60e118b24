#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fnl/errors.hpp"
#include "fnl/version.hpp"

#include <nlohmann/json.hpp>

namespace fnl {

// 64-bit FNV-1a; used to fingerprint configuration text in run manifests.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 1099511628211ull;
    }
    return h;
}

// Round-trip decimal formatting for doubles (17 significant digits).
inline std::string format_number(double v) {
    char buf[64];
    const int k = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, buf + (k > 0 ? k : 0));
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

struct Cell {
    enum class Kind { Number, Integer, Text };
    Kind kind = Kind::Number;
    double num = 0.0;
    std::int64_t ival = 0;
    std::string text;

    static Cell number(double v) {
        Cell c;
        c.kind = Kind::Number;
        c.num = v;
        return c;
    }
    static Cell integer(std::int64_t v) {
        Cell c;
        c.kind = Kind::Integer;
        c.ival = v;
        return c;
    }
    static Cell of(std::string s) {
        Cell c;
        c.kind = Kind::Text;
        c.text = std::move(s);
        return c;
    }
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add_row(std::vector<Cell> cells) {
        if (cells.size() != columns.size())
            throw DomainError("table row width does not match header");
        rows.push_back(std::move(cells));
    }
};

namespace detail_report {

inline void csv_field(std::ostream& os, std::string_view s) {
    const bool quote = s.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!quote) {
        os << s;
        return;
    }
    os << '"';
    for (char c : s) {
        if (c == '"') os << '"';
        os << c;
    }
    os << '"';
}

} // namespace detail_report

inline void write_csv(const Table& t, std::ostream& os) {
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
        if (j) os << ',';
        detail_report::csv_field(os, t.columns[j]);
    }
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) os << ',';
            if (row[j].kind == Cell::Kind::Number)
                os << format_number(row[j].num);
            else if (row[j].kind == Cell::Kind::Integer)
                os << row[j].ival;
            else
                detail_report::csv_field(os, row[j].text);
        }
        os << '\n';
    }
}

// JSON mirror of the CSV: an array of one flat object per row.
inline void write_json(const Table& t, std::ostream& os) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (row[j].kind == Cell::Kind::Number)
                obj[t.columns[j]] = row[j].num;
            else if (row[j].kind == Cell::Kind::Integer)
                obj[t.columns[j]] = row[j].ival;
            else
                obj[t.columns[j]] = row[j].text;
        }
        arr.push_back(std::move(obj));
    }
    os << arr.dump(2) << '\n';
}

inline void write_table_file(const Table& t, const std::string& path,
                             bool as_json) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DomainError("cannot open output file '" + path + "'");
    if (as_json)
        write_json(t, os);
    else
        write_csv(t, os);
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

// Written next to file outputs. `generated_at` is wall clock and is the one
// field expected to differ between otherwise identical runs; every data file
// the run produced must be byte-identical for equal (config, seed).
struct RunManifest {
    std::string command;
    std::uint64_t config_hash = 0;
    std::uint64_t master_seed = 0;
    std::size_t threads = 1;
    std::vector<std::string> outputs;
    std::string verdict; // adjudication result when the run produced one
    std::string generated_at;
};

inline std::string manifest_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["tool"] = "fnlab";
    j["version"] = version;
    j["command"] = m.command;
    j["config_hash"] = m.config_hash;
    j["master_seed"] = m.master_seed;
    j["threads"] = m.threads;
    j["outputs"] = m.outputs;
    if (!m.verdict.empty()) j["verdict"] = m.verdict;
    j["generated_at"] = m.generated_at;
    return j.dump(2) + "\n";
}

inline void write_manifest(const RunManifest& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DomainError("cannot open manifest file '" + path + "'");
    os << manifest_json(m);
}

} // namespace fnl
