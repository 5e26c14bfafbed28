#include "segaudit/text.hpp"

#include <charconv>
#include <cstdio>
#include <system_error>

namespace segaudit {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    if (res.ec != std::errc{}) return "nan";
    return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int decimals, bool force_sign) {
    char buf[64];
    std::snprintf(buf, sizeof buf, force_sign ? "%+.*f" : "%.*f", decimals, v);
    return buf;
}

}  // namespace segaudit
