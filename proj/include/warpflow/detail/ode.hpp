#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "warpflow/common.hpp"

namespace warpflow::detail {

struct OdeOptions {
    double rtol = 1e-12;
    double atol = 1e-14;
    double dt_init = 1e-4;
    double dt_min = 1e-14;
    std::size_t max_steps = 2'000'000;
};

/// Cash-Karp 4(5) step: advances y by dt, writes the 5th-order result into
/// ynew and returns the embedded error estimate (scaled RMS norm).
template <class F>
double cash_karp_step(F&& f, double t, const std::vector<double>& y, double dt, std::vector<double>& ynew,
                      const OdeOptions& opt) {
    static constexpr double b21 = 1.0 / 5;
    static constexpr double b31 = 3.0 / 40, b32 = 9.0 / 40;
    static constexpr double b41 = 3.0 / 10, b42 = -9.0 / 10, b43 = 6.0 / 5;
    static constexpr double b51 = -11.0 / 54, b52 = 5.0 / 2, b53 = -70.0 / 27, b54 = 35.0 / 27;
    static constexpr double b61 = 1631.0 / 55296, b62 = 175.0 / 512, b63 = 575.0 / 13824, b64 = 44275.0 / 110592,
                            b65 = 253.0 / 4096;
    static constexpr double c1 = 37.0 / 378, c3 = 250.0 / 621, c4 = 125.0 / 594, c6 = 512.0 / 1771;
    static constexpr double d1 = c1 - 2825.0 / 27648, d3 = c3 - 18575.0 / 48384, d4 = c4 - 13525.0 / 55296,
                            d5 = -277.0 / 14336, d6 = c6 - 1.0 / 4;
    static constexpr double a2 = 1.0 / 5, a3 = 3.0 / 10, a4 = 3.0 / 5, a5 = 1.0, a6 = 7.0 / 8;

    const std::size_t n = y.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), tmp(n);
    f(t, y, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * b21 * k1[i];
    f(t + a2 * dt, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * (b31 * k1[i] + b32 * k2[i]);
    f(t + a3 * dt, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * (b41 * k1[i] + b42 * k2[i] + b43 * k3[i]);
    f(t + a4 * dt, tmp, k4);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * (b51 * k1[i] + b52 * k2[i] + b53 * k3[i] + b54 * k4[i]);
    f(t + a5 * dt, tmp, k5);
    for (std::size_t i = 0; i < n; ++i)
        tmp[i] = y[i] + dt * (b61 * k1[i] + b62 * k2[i] + b63 * k3[i] + b64 * k4[i] + b65 * k5[i]);
    f(t + a6 * dt, tmp, k6);

    ynew.resize(n);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ynew[i] = y[i] + dt * (c1 * k1[i] + c3 * k3[i] + c4 * k4[i] + c6 * k6[i]);
        const double e = dt * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i]);
        const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        err += sq(e / sc);
    }
    return std::sqrt(err / double(n));
}

/// Integrate dy/dt = f(t,y) from t0 to t1 (t1 > t0) with adaptive steps,
/// landing exactly on t1. The state is updated in place.
template <class F>
void integrate_to(F&& f, std::vector<double>& y, double t0, double t1, const OdeOptions& opt = {}) {
    double t = t0;
    double dt = std::min(opt.dt_init, t1 - t0);
    std::vector<double> ynew;
    std::size_t steps = 0;
    while (t < t1) {
        if (++steps > opt.max_steps) throw numerical_error("integrate_to: step limit exceeded");
        if (t + dt > t1) dt = t1 - t;
        const double err = cash_karp_step(f, t, y, dt, ynew, opt);
        if (err <= 1.0) {
            t += dt;
            y.swap(ynew);
            const double grow = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
            dt *= std::min(5.0, std::max(0.2, grow));
        } else {
            dt *= std::max(0.2, 0.9 * std::pow(err, -0.25));
            if (dt < opt.dt_min) throw numerical_error("integrate_to: step size underflow");
        }
    }
}

} // namespace warpflow::detail
