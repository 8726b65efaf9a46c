#pragma once

// Minimal RFC 4180-style CSV: comma delimiter, double-quote escaping, LF or
// CRLF record ends, UTF-8 passthrough. Empty field means missing value.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rankforge/errors.hpp"

namespace rankforge::csv {

struct Record {
    std::vector<std::string> fields;
    std::size_t line = 0;  // 1-based line the record starts on
};

struct Table {
    std::vector<std::string> header;
    std::vector<Record> rows;
};

inline Table parse(const std::string& text, const std::string& origin) {
    Table table;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool has_any = false;
    std::size_t line = 1;
    std::size_t record_line = 1;

    auto end_field = [&] {
        fields.push_back(std::move(field));
        field.clear();
        has_any = true;
    };
    auto end_record = [&] {
        end_field();
        if (table.header.empty()) {
            table.header = std::move(fields);
        } else {
            table.rows.push_back({std::move(fields), record_line});
        }
        fields.clear();
        has_any = false;
        record_line = line;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty()) {
                    fail("MalformedRow", origin + ": stray quote on line " + std::to_string(line));
                }
                in_quotes = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') break;  // handled at \n
                ++line;
                end_record();
                break;
            case '\n':
                ++line;
                end_record();
                break;
            default:
                field.push_back(c);
        }
    }
    if (in_quotes) {
        fail("MalformedRow", origin + ": unterminated quote at end of file");
    }
    if (has_any || !field.empty()) {
        end_record();  // final record without trailing newline
    }
    return table;
}

inline Table read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail("IoError", "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.filename().string());
}

inline std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.put(',');
        out << escape(fields[i]);
    }
    out.put('\n');
}

// shortest round-trip text for a double
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(const std::string& s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

}  // namespace rankforge::csv
