#pragma once

// Minimal RFC-4180 style reader/writer: comma delimiter, optional double
// quotes with "" escapes, header row mandatory. Lines starting with '#'
// before the header are skipped.

#include <fstream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "dfs/error.hpp"

namespace dfs::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

inline Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open " + path);
    Table t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_header) {
            // tolerate a UTF-8 byte order mark and leading '#' provenance lines
            if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            if (line.rfind('#', 0) == 0) continue;
            t.header = split_line(line);
            have_header = true;
            continue;
        }
        if (line.empty()) continue;
        t.rows.push_back(split_line(line));
    }
    if (!have_header) throw SchemaError(path + ": missing header row");
    return t;
}

inline std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os << ',';
        os << escape(fields[i]);
    }
    os << '\n';
}

}  // namespace dfs::csv
