#pragma once

#include <cstdio>
#include <string>

namespace sskp {

// Deterministic numeric formatting for CSV output: integers print bare,
// everything else with 17 significant digits (round-trippable).
inline std::string csv_num(double v) {
    if (v == static_cast<long long>(v) && v > -9.0e15 && v < 9.0e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
        return buf;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace sskp
