#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mobaudit/errors.hpp"

namespace mobaudit {

inline std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<int64_t> parse_i64(std::string_view s) {
    int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

// Buffered delimited-text reader. Fields are views into an internal line
// buffer, valid until the next next_row() call. No quoting support: the file
// formats in this project are plain delimited columns.
class CsvReader {
public:
    CsvReader(const std::string& path, char delimiter = ',');

    const std::vector<std::string>& header() const { return header_; }

    // Column index by header name, or nullopt.
    std::optional<size_t> column(std::string_view name) const;

    // Same, throwing ConfigError naming the column.
    size_t require_column(std::string_view name) const;

    // Fills `fields` with the next row; returns false at EOF.
    // Blank lines are skipped.
    bool next_row(std::vector<std::string_view>& fields);

    size_t line_number() const { return line_number_; }

private:
    bool next_line(std::string_view& line);

    std::ifstream in_;
    std::string path_;
    char delim_;
    std::vector<std::string> header_;
    std::vector<char> buf_;
    size_t buf_pos_ = 0;
    size_t buf_len_ = 0;
    std::string line_;
    size_t line_number_ = 0;
    bool eof_ = false;
};

class CsvWriter {
public:
    CsvWriter(const std::string& path, char delimiter = ',');
    ~CsvWriter();

    void write_row(const std::vector<std::string>& fields);
    void write_raw(std::string_view line); // pre-joined line, newline appended
    void flush();

private:
    std::ofstream out_;
    std::string path_;
    char delim_;
    std::string buf_;
};

void split_view(std::string_view line, char delim, std::vector<std::string_view>& out);

} // namespace mobaudit
