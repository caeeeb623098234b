#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace warpflow {

/// Raised on malformed run configuration (unknown keys, bad values, missing
/// required entries). The CLI maps it to exit code 2.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when an algorithm leaves its domain of validity (non-finite state,
/// failed bracket, singular quadrature, unconverged fit). CLI exit code 3.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a certification sweep that was expected to succeed fails.
/// CLI exit code 1.
struct certification_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double pi = 3.14159265358979323846;

/// alpha^2 constant attached to a sphere dimension: alpha_d^2 = 2(d-1).
inline constexpr double alpha_sq(int d) { return 2.0 * (d - 1); }

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double sq(double x) { return x * x; }

/// C^2 smoothstep on [0,1]: w(0)=0, w(1)=1, vanishing first and second
/// derivatives at both ends.
inline double smoothstep2(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

} // namespace warpflow
