#pragma once

#include <charconv>
#include <cmath>
#include <concepts>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>

namespace qmclab {

/// Shortest decimal that round-trips the double; "nan", "inf", "-inf" otherwise.
inline std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buffer[64];
    const auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return {buffer, end};
}

class CsvWriter {
public:
    CsvWriter(std::ostream& out, std::initializer_list<std::string_view> header) : out_(out), columns_(header.size()) {
        bool first = true;
        for (auto name : header) {
            if (!first) out_ << ',';
            out_ << name;
            first = false;
        }
        out_ << '\n';
    }

    template <class... Fields>
    void row(const Fields&... fields) {
        static_assert(sizeof...(Fields) > 0);
        bool first = true;
        ((write_field(fields, first)), ...);
        out_ << '\n';
    }

    std::size_t columns() const noexcept { return columns_; }

private:
    template <class T>
    void write_field(const T& value, bool& first) {
        if (!first) out_ << ',';
        first = false;
        if constexpr (std::floating_point<T>) {
            out_ << format_double(static_cast<double>(value));
        } else if constexpr (std::integral<T>) {
            out_ << std::to_string(value);
        } else {
            write_text(std::string_view(value));
        }
    }

    void write_text(std::string_view text) {
        if (text.find_first_of(",\"\n") == std::string_view::npos) {
            out_ << text;
            return;
        }
        out_ << '"';
        for (char c : text) {
            if (c == '"') out_ << '"';
            out_ << c;
        }
        out_ << '"';
    }

    std::ostream& out_;
    std::size_t columns_;
};

}  // namespace qmclab
