#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>

#include "hrf/error.hpp"

namespace hrf {

/// Shortest decimal form that parses back to the same double.
inline std::string format_real(double value)
{
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) {
        throw Error("cannot format number");
    }
    return std::string(buf.data(), end);
}

/// Fixed-point rendering used by the human-facing report tables.
inline std::string format_fixed(double value, int precision, bool explicit_plus = false)
{
    std::array<char, 64> buf{};
    // -0.000 would make identical rows look different
    if (std::abs(value) < 0.5 * std::pow(10.0, -precision)) {
        value = 0.0;
    }
    std::snprintf(buf.data(), buf.size(), explicit_plus ? "%+.*f" : "%.*f", precision, value);
    return buf.data();
}

inline bool parse_real(std::string_view text, double &out)
{
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

template <typename Int>
bool parse_int(std::string_view text, Int &out)
{
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

} // namespace hrf
