#pragma once

#include "intellipred/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace intellipred::csv {

/// Minimal RFC 4180 table: first record is the header.
struct Table
{
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index of `name`; throws FormatError when absent.
    std::size_t column(std::string_view name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return i;
        throw FormatError(fmt::format("{}: missing column '{}'", source, name));
    }
};

inline std::vector<std::vector<std::string>> parse_records(std::string_view text, const std::string& source)
{
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        // blank lines are skipped
        if (!(record.size() == 1 && record[0].empty()))
            records.push_back(std::move(record));
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n')
                    ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field_started || !field.empty())
                throw FormatError(fmt::format("{}:{}: stray quote inside field", source, line));
            quoted = true;
            field_started = true;
            break;
        case ',': end_field(); break;
        case '\r': break;
        case '\n':
            end_record();
            ++line;
            break;
        default: field.push_back(c); field_started = true;
        }
    }
    if (quoted)
        throw FormatError(fmt::format("{}: unterminated quoted field", source));
    if (field_started || !field.empty() || !record.empty())
        end_record();
    return records;
}

inline Table parse(std::string_view text, std::string source)
{
    auto records = parse_records(text, source);
    Table t;
    t.source = std::move(source);
    if (records.empty())
        throw FormatError(fmt::format("{}: missing header line", t.source));
    t.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.header.size())
            throw FormatError(fmt::format("{}: record {} has {} fields, header has {}", t.source, r,
                                          records[r].size(), t.header.size()));
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

inline Table read(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

inline std::string escape(std::string_view field)
{
    if (field.find_first_of(",\"\r\n") == std::string_view::npos)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string join_row(const std::vector<std::string>& fields)
{
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i)
            line.push_back(',');
        line += escape(fields[i]);
    }
    line.push_back('\n');
    return line;
}

inline double to_double(std::string_view s, std::string_view what)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw FormatError(fmt::format("{}: '{}' is not a number", what, s));
    return v;
}

inline void write_text(const std::filesystem::path& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError(fmt::format("cannot write '{}'", path.string()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out)
        throw IoError(fmt::format("error writing '{}'", path.string()));
}

} // namespace intellipred::csv
