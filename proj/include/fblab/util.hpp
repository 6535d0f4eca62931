#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace fblab {

// All geometry runs in at most three dimensions; a point is a fixed-size
// array with unused trailing entries kept at zero.
using Vec = std::array<double, 3>;

inline void check(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

[[noreturn]] inline void fail(const std::string& msg) {
    throw std::runtime_error(msg);
}

inline double dot(const Vec& a, const Vec& b, int dim) {
    double s = 0;
    for (int k = 0; k < dim; ++k) s += a[k] * b[k];
    return s;
}

inline double norm(const Vec& a, int dim) { return std::sqrt(dot(a, a, dim)); }

inline Vec scaled(const Vec& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }

inline Vec sub(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

inline Vec add(const Vec& a, const Vec& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }

// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    double back = std::strtod(buf, nullptr);
    if (back == x) {
        for (int prec = 1; prec <= 16; ++prec) {
            char shorter[40];
            std::snprintf(shorter, sizeof(shorter), "%.*g", prec, x);
            if (std::strtod(shorter, nullptr) == x) return shorter;
        }
    }
    return buf;
}

}  // namespace fblab
