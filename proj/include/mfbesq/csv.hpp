#pragma once

#include <cstdio>
#include <ostream>
#include <string>

namespace mfbesq {

// All CSV output uses '.' as decimal separator, '\n' newlines and 9
// significant digits.
inline std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline void csv_row(std::ostream& os, const double* vals, int count) {
    for (int i = 0; i < count; ++i) {
        if (i) os << ',';
        os << fmt9(vals[i]);
    }
    os << '\n';
}

} // namespace mfbesq
