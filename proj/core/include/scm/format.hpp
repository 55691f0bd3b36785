#pragma once

#include <charconv>
#include <string>

namespace scm {

/// Shortest round-trip decimal form of a double; output is byte-stable across runs.
inline std::string format_double(double x) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, result.ptr);
}

} // namespace scm
