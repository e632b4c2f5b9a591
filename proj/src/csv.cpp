#include "mobaudit/csv.hpp"

#include <cstring>

namespace mobaudit {

namespace {
constexpr size_t kBufSize = 1 << 20;
} // namespace

void split_view(std::string_view line, char delim, std::vector<std::string_view>& out) {
    out.clear();
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == delim) {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
}

CsvReader::CsvReader(const std::string& path, char delimiter)
    : in_(path, std::ios::binary), path_(path), delim_(delimiter), buf_(kBufSize) {
    if (!in_) throw IoError("cannot open " + path);
    std::string_view line;
    if (!next_line(line)) throw DataError(path + ": empty file, expected header");
    std::vector<std::string_view> fields;
    split_view(line, delim_, fields);
    header_.assign(fields.begin(), fields.end());
    // strip UTF-8 BOM if present
    if (!header_.empty() && header_[0].size() >= 3 &&
        static_cast<unsigned char>(header_[0][0]) == 0xEF) {
        header_[0].erase(0, 3);
    }
}

std::optional<size_t> CsvReader::column(std::string_view name) const {
    for (size_t i = 0; i < header_.size(); ++i) {
        if (header_[i] == name) return i;
    }
    return std::nullopt;
}

size_t CsvReader::require_column(std::string_view name) const {
    auto idx = column(name);
    if (!idx) throw ConfigError(path_ + ": missing required column '" + std::string(name) + "'");
    return *idx;
}

bool CsvReader::next_line(std::string_view& line) {
    line_.clear();
    for (;;) {
        if (buf_pos_ >= buf_len_) {
            if (eof_) break;
            in_.read(buf_.data(), static_cast<std::streamsize>(buf_.size()));
            buf_len_ = static_cast<size_t>(in_.gcount());
            buf_pos_ = 0;
            if (buf_len_ == 0) {
                eof_ = true;
                break;
            }
        }
        const char* begin = buf_.data() + buf_pos_;
        const char* nl = static_cast<const char*>(
            memchr(begin, '\n', buf_len_ - buf_pos_));
        if (nl) {
            line_.append(begin, static_cast<size_t>(nl - begin));
            buf_pos_ += static_cast<size_t>(nl - begin) + 1;
            ++line_number_;
            if (!line_.empty() && line_.back() == '\r') line_.pop_back();
            line = line_;
            return true;
        }
        line_.append(begin, buf_len_ - buf_pos_);
        buf_pos_ = buf_len_;
    }
    if (line_.empty()) return false;
    ++line_number_;
    if (line_.back() == '\r') line_.pop_back();
    line = line_;
    return true;
}

bool CsvReader::next_row(std::vector<std::string_view>& fields) {
    std::string_view line;
    for (;;) {
        if (!next_line(line)) return false;
        if (!line.empty()) break;
    }
    split_view(line, delim_, fields);
    return true;
}

CsvWriter::CsvWriter(const std::string& path, char delimiter)
    : out_(path, std::ios::binary), path_(path), delim_(delimiter) {
    if (!out_) throw IoError("cannot open " + path + " for writing");
    buf_.reserve(kBufSize);
}

CsvWriter::~CsvWriter() {
    try {
        flush();
    } catch (...) {
    }
}

void CsvWriter::write_row(const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) buf_.push_back(delim_);
        buf_ += fields[i];
    }
    buf_.push_back('\n');
    if (buf_.size() >= kBufSize) flush();
}

void CsvWriter::write_raw(std::string_view line) {
    buf_ += line;
    buf_.push_back('\n');
    if (buf_.size() >= kBufSize) flush();
}

void CsvWriter::flush() {
    if (!buf_.empty()) {
        out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        buf_.clear();
    }
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_);
}

} // namespace mobaudit
