#pragma once

#include <cstdio>
#include <string>

namespace vps {

/// Shortest-safe round-trip formatting used for every numeric output.
inline std::string fmt17(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace vps
