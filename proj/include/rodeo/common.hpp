#pragma once

#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rodeo {

/// Raised when a computation is mathematically impossible on the given
/// inputs (insufficient local support, singular system beyond the ridge
/// guard, empty summaries). Distinct from std::invalid_argument, which is
/// reserved for caller errors (bad flags, malformed files, out-of-range
/// parameters).
class numerical_error : public std::runtime_error {
  public:
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Formats a double with 17 significant digits, locale-independent.
/// 17 digits round-trip any IEEE double bit-exactly through parse_double.
inline std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

/// Locale-independent strict parse of a decimal real. Leading/trailing
/// whitespace is not accepted; the whole token must be consumed.
inline bool try_parse_double(std::string_view token, double& out) {
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

inline double parse_double(std::string_view token, const std::string& context) {
    double v = 0.0;
    if (!try_parse_double(token, v)) {
        throw std::invalid_argument("cannot parse '" + std::string(token) + "' as a real number (" +
                                    context + ")");
    }
    return v;
}

}  // namespace rodeo
