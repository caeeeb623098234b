#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "warpflow/common.hpp"

namespace warpflow {

/// Samples of a scalar field on a strictly increasing 1-d grid.
struct GridFunction {
    std::vector<double> x;
    std::vector<double> f;

    std::size_t size() const { return x.size(); }

    void validate() const {
        if (x.size() != f.size()) throw numerical_error("GridFunction: size mismatch");
        if (x.size() < 2) throw numerical_error("GridFunction: need at least 2 nodes");
        for (std::size_t i = 1; i < x.size(); ++i)
            if (!(x[i] > x[i - 1])) throw numerical_error("GridFunction: grid not strictly increasing");
    }
};

// === finite differences on nonuniform grids ===================================

// Second-order 3-point first derivative weights at the middle node of
// (x0,x1,x2): standard nonuniform central stencil.
inline double d1_central(double fm, double f0, double fp, double hm, double hp) {
    return (fp * hm * hm - fm * hp * hp + f0 * (hp * hp - hm * hm)) / (hm * hp * (hm + hp));
}

// 3-point second derivative (first-order on general nonuniform grids, exact
// for quadratics; second-order on smoothly varying grids).
inline double d2_central(double fm, double f0, double fp, double hm, double hp) {
    return 2.0 * (fm * hp - f0 * (hm + hp) + fp * hm) / (hm * hp * (hm + hp));
}

// Finite-difference weights for the m-th derivative at z from up to 5 nodes
// (Fornberg recurrence). w must hold x.size() doubles.
inline void fd_weights(double z, std::span<const double> x, int m, double* w) {
    const std::size_t n = x.size();
    if (n > 5 || m > 2) throw numerical_error("fd_weights: supports up to 5 nodes, order 2");
    double W[5][3] = {};
    double c1 = 1.0, c4 = x[0] - z;
    W[0][0] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const int mn = int(std::min<std::size_t>(i, std::size_t(m)));
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - z;
        for (std::size_t j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) W[i][k] = c1 * (k * W[i - 1][k - 1] - c5 * W[i - 1][k]) / c2;
                W[i][0] = -c1 * c5 * W[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) W[j][k] = (c4 * W[j][k] - k * W[j][k - 1]) / c3;
            W[j][0] = c4 * W[j][0] / c3;
        }
        c1 = c2;
    }
    for (std::size_t j = 0; j < n; ++j) w[j] = W[j][m];
}

/// First (order 1) or second (order 2) derivative of f on its grid.
/// Interior nodes use 3-point centered stencils; endpoints use one-sided
/// 4-point stencils so the sup-norm error stays second order for both.
inline std::vector<double> differentiate(std::span<const double> x, std::span<const double> f, int order) {
    const std::size_t n = x.size();
    if (n != f.size()) throw numerical_error("differentiate: size mismatch");
    if (n < 4) throw numerical_error("differentiate: grid too short (need >= 4 nodes)");
    if (order != 1 && order != 2) throw numerical_error("differentiate: order must be 1 or 2");
    std::vector<double> out(n);
    if (order == 1) {
        for (std::size_t i = 1; i + 1 < n; ++i)
            out[i] = d1_central(f[i - 1], f[i], f[i + 1], x[i] - x[i - 1], x[i + 1] - x[i]);
    } else {
        for (std::size_t i = 1; i + 1 < n; ++i)
            out[i] = d2_central(f[i - 1], f[i], f[i + 1], x[i] - x[i - 1], x[i + 1] - x[i]);
    }
    double w[4];
    fd_weights(x[0], x.subspan(0, 4), order, w);
    out[0] = w[0] * f[0] + w[1] * f[1] + w[2] * f[2] + w[3] * f[3];
    fd_weights(x[n - 1], x.subspan(n - 4, 4), order, w);
    out[n - 1] = w[0] * f[n - 4] + w[1] * f[n - 3] + w[2] * f[n - 2] + w[3] * f[n - 1];
    return out;
}

inline std::vector<double> differentiate(const GridFunction& g, int order) {
    g.validate();
    return differentiate(g.x, g.f, order);
}

// === quadrature ================================================================

/// Composite trapezoid integral of f over its grid.
inline double trapz(std::span<const double> x, std::span<const double> f) {
    double acc = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) acc += 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
    return acc;
}

/// Running trapezoid integral, out[0] = 0.
inline std::vector<double> cumtrapz(std::span<const double> x, std::span<const double> f) {
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t i = 1; i < x.size(); ++i)
        out[i] = out[i - 1] + 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
    return out;
}

// === interpolation =============================================================

inline std::size_t bracket_index(std::span<const double> x, double xq) {
    if (xq <= x.front()) return 0;
    if (xq >= x[x.size() - 2]) return x.size() - 2;
    return static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), xq) - x.begin()) - 1;
}

/// Piecewise-linear interpolation (clamped at the ends).
inline double interp_linear(std::span<const double> x, std::span<const double> f, double xq) {
    const std::size_t i = bracket_index(x, xq);
    const double t = (xq - x[i]) / (x[i + 1] - x[i]);
    return f[i] + std::clamp(t, 0.0, 1.0) * (f[i + 1] - f[i]);
}

/// Monotone cubic Hermite slopes (Fritsch-Carlson). Preserves monotone runs of
/// the data; used for resampling profiles without overshoot.
inline std::vector<double> pchip_slopes(std::span<const double> x, std::span<const double> f) {
    const std::size_t n = x.size();
    if (n == 2) {
        const double s = (f[1] - f[0]) / (x[1] - x[0]);
        return {s, s};
    }
    std::vector<double> d(n, 0.0), h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x[i + 1] - x[i];
        delta[i] = (f[i + 1] - f[i]) / h[i];
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) {
            d[i] = 0.0;
        } else {
            const double w1 = 2.0 * h[i] + h[i - 1], w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
        double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (s * d0 <= 0.0) s = 0.0;
        else if (d0 * d1 <= 0.0 && std::abs(s) > 3.0 * std::abs(d0)) s = 3.0 * d0;
        return s;
    };
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    return d;
}

inline double hermite_eval(double x0, double x1, double f0, double f1, double d0, double d1, double xq) {
    const double h = x1 - x0, t = (xq - x0) / h;
    const double t2 = t * t, t3 = t2 * t;
    return f0 * (2 * t3 - 3 * t2 + 1) + h * d0 * (t3 - 2 * t2 + t) + f1 * (-2 * t3 + 3 * t2) + h * d1 * (t3 - t2);
}

/// Cubic Hermite interpolant with precomputed slopes.
struct HermiteSeries {
    std::vector<double> x, f, d;

    static HermiteSeries pchip(std::span<const double> x, std::span<const double> f) {
        HermiteSeries s;
        s.x.assign(x.begin(), x.end());
        s.f.assign(f.begin(), f.end());
        s.d = pchip_slopes(x, f);
        return s;
    }

    double operator()(double xq) const {
        const std::size_t i = bracket_index(x, xq);
        return hermite_eval(x[i], x[i + 1], f[i], f[i + 1], d[i], d[i + 1], xq);
    }
};

// === grid builders =============================================================

/// Geometric grid on [0, length]: first interval dx0, each subsequent interval
/// scaled by `ratio`, capped at dx_max. Always ends exactly at `length`.
inline std::vector<double> geometric_grid(double length, double dx0, double ratio, double dx_max) {
    if (!(length > 0.0) || !(dx0 > 0.0) || !(ratio >= 1.0)) throw numerical_error("geometric_grid: bad parameters");
    std::vector<double> x{0.0};
    double dx = dx0;
    while (x.back() < length) {
        x.push_back(x.back() + dx);
        dx = std::min(dx * ratio, dx_max);
    }
    // snap the tail so the last node is exactly `length` without a sliver cell
    const std::size_t n = x.size();
    if (n >= 3 && (length - x[n - 2]) < 0.3 * (x[n - 2] - x[n - 3])) x.pop_back();
    x.back() = length;
    return x;
}

} // namespace warpflow
