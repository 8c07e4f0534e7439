#include "csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace qdelay::csv {

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

Writer::Writer(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
}

void Writer::line(const std::string& text) {
    out_ << text << '\n';
    if (!out_) throw IoError("write failed on '" + path_ + "'");
}

void Writer::close() {
    out_.close();
    if (!out_) throw IoError("cannot finish writing '" + path_ + "'");
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> parts;
    std::string current;
    for (char ch : line) {
        if (ch == sep) {
            parts.push_back(current);
            current.clear();
        } else if (ch != '\r') {
            current += ch;
        }
    }
    parts.push_back(current);
    return parts;
}

Reader::Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in_, line) || line.empty() || line == "\r") throw FormatError(path + ": file is empty");
    line_no_ = 1;
    header_ = split(line);
}

void Reader::expect_header(const std::vector<std::string>& columns) {
    if (header_.size() != columns.size()) {
        throw FormatError(path_ + ":1: expected " + std::to_string(columns.size()) + " columns, found " +
                          std::to_string(header_.size()));
    }
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (header_[i] != columns[i]) {
            throw FormatError(path_ + ":1: column " + std::to_string(i + 1) + " should be '" + columns[i] + "', found '" +
                              header_[i] + "'");
        }
    }
}

bool Reader::next(std::vector<double>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_no_;
        if (line.empty() || line == "\r") continue;
        const auto parts = split(line);
        if (parts.size() != header_.size()) {
            throw FormatError(where() + ": expected " + std::to_string(header_.size()) + " fields, found " +
                              std::to_string(parts.size()));
        }
        fields.resize(parts.size());
        for (std::size_t i = 0; i < parts.size(); ++i) {
            const char* begin = parts[i].c_str();
            char* end = nullptr;
            errno = 0;
            const double v = std::strtod(begin, &end);
            if (parts[i].empty() || end != begin + parts[i].size() || (errno == ERANGE && std::isinf(v))) {
                throw FormatError(where() + ": field " + std::to_string(i + 1) + " ('" + parts[i] + "') is not a number");
            }
            fields[i] = v;
        }
        return true;
    }
    return false;
}

std::string Reader::where() const { return path_ + ":" + std::to_string(line_no_); }

}  // namespace qdelay::csv
