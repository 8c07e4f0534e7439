#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "qdelay/error.hpp"

namespace qdelay::csv {

/// 17 significant digits; strtod recovers the exact double.
std::string format_number(double value);

class Writer {
public:
    explicit Writer(const std::string& path);

    void line(const std::string& text);

    template <class... Fields>
    void row(const Fields&... fields) {
        std::string text;
        bool first = true;
        (append(text, fields, first), ...);
        line(text);
    }

    void close();

private:
    template <class T>
    static void append(std::string& text, const T& value, bool& first) {
        if (!first) text += ',';
        first = false;
        if constexpr (std::is_integral_v<T>) {
            text += std::to_string(value);
        } else if constexpr (std::is_floating_point_v<T>) {
            text += format_number(static_cast<double>(value));
        } else {
            text += value;
        }
    }

    std::string path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path);

    /// Header columns, split on commas.
    const std::vector<std::string>& header() const { return header_; }

    /// Throws FormatError naming expected and found columns on mismatch.
    void expect_header(const std::vector<std::string>& columns);

    /// Parses the next data row into numbers. Returns false at end of file.
    bool next(std::vector<double>& fields);

    /// "path:line" of the row most recently read.
    std::string where() const;

private:
    std::string path_;
    std::ifstream in_;
    std::vector<std::string> header_;
    std::size_t line_no_ = 0;
};

std::vector<std::string> split(const std::string& line, char sep = ',');

}  // namespace qdelay::csv
