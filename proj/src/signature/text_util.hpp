#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "safeai/model.hpp"

namespace safeai::detail {

inline std::string hex(std::string_view bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char c : bytes) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xF]);
    }
    return out;
}

// Double-quoted, with backslash escapes for quotes, backslashes, control
// characters and non-ASCII bytes, so the result is plain ASCII.
inline std::string quote(std::string_view s) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out = "\"";
    for (unsigned char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
            out += static_cast<char>(c);
        } else if (c < 0x20 || c >= 0x7F) {
            out += "\\x";
            out += digits[c >> 4];
            out += digits[c & 0xF];
        } else {
            out += static_cast<char>(c);
        }
    }
    return out + "\"";
}

// Shortest text that round-trips the float exactly.
inline std::string format_float(float v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

inline std::string dims_text(const std::vector<std::int64_t>& dims) {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

inline std::string tensor_desc(DataType dtype, const std::vector<std::int64_t>& dims) {
    return std::string(to_string(dtype)) + " " + dims_text(dims);
}

inline std::string render_attribute_value(const Attribute& a) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::int64_t>) {
                return "int " + std::to_string(v);
            } else if constexpr (std::is_same_v<T, std::vector<std::int64_t>>) {
                return "ints " + dims_text(v);
            } else if constexpr (std::is_same_v<T, float>) {
                return "float " + format_float(v);
            } else if constexpr (std::is_same_v<T, std::vector<float>>) {
                std::string s = "floats [";
                for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_float(v[i]);
                return s + "]";
            } else if constexpr (std::is_same_v<T, std::string>) {
                return "string " + quote(v);
            } else {
                return "tensor " + tensor_desc(v.dtype, v.dims) + " " +
                       hex(std::string_view(reinterpret_cast<const char*>(v.raw.data()), v.raw.size()));
            }
        },
        a.value);
}

inline std::vector<Attribute> sorted_attributes(std::vector<Attribute> attrs) {
    std::sort(attrs.begin(), attrs.end(), [](const Attribute& x, const Attribute& y) { return x.name < y.name; });
    return attrs;
}

}  // namespace safeai::detail
