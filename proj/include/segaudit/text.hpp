#pragma once

#include <string>

namespace segaudit {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

/// printf-style fixed formatting, e.g. format_fixed(0.91452, 4) == "0.9145".
std::string format_fixed(double v, int decimals, bool force_sign = false);

}  // namespace segaudit
