#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "warpflow/common.hpp"
#include "warpflow/grid.hpp"

namespace warpflow {

/// Metric profile ds^2 + psi(s)^2 g_{S^p} + phi(s)^2 g_{S^q} sampled on an
/// arclength grid. When the profile was produced in the x-gauge, `x` and
/// `sprime` carry the flat coordinate and s'(x); `s` is then its running
/// integral.
struct WarpedProfile {
    int p = 1;
    int q = 2;
    std::vector<double> s;
    std::vector<double> psi;
    std::vector<double> phi;
    double grad_bound_C = 1.0;

    std::vector<double> x;       // optional x-gauge nodes
    std::vector<double> sprime;  // optional s'(x) field, same length as x

    bool has_x_gauge() const { return !x.empty(); }
    std::size_t size() const { return s.size(); }

    void validate() const {
        if (p < 0 || q < 1) throw numerical_error("WarpedProfile: need p >= 0, q >= 1");
        if (s.size() < 4 || psi.size() != s.size() || phi.size() != s.size())
            throw numerical_error("WarpedProfile: field sizes");
        for (std::size_t i = 1; i < s.size(); ++i)
            if (!(s[i] > s[i - 1])) throw numerical_error("WarpedProfile: arclength not increasing");
        for (std::size_t i = 0; i < s.size(); ++i)
            if (psi[i] < 0.0 || phi[i] < 0.0) throw numerical_error("WarpedProfile: negative warping factor");
        if (!x.empty() && (x.size() != s.size() || sprime.size() != s.size()))
            throw numerical_error("WarpedProfile: x-gauge fields misaligned");
    }

    static WarpedProfile from_x_gauge(int p, int q, std::vector<double> x, std::vector<double> sprime,
                                      std::vector<double> psi, std::vector<double> phi) {
        WarpedProfile w;
        w.p = p;
        w.q = q;
        w.s = cumtrapz(x, sprime);
        w.psi = std::move(psi);
        w.phi = std::move(phi);
        w.x = std::move(x);
        w.sprime = std::move(sprime);
        w.validate();
        return w;
    }
};

/// The five sectional-curvature families of a doubly warped product over an
/// interval, sampled per node.
struct CurvatureTuple {
    std::vector<double> L_phi;  // S^q plane pairs: (1 - phi_s^2)/phi^2
    std::vector<double> L_psi;  // S^p plane pairs: (1 - psi_s^2)/psi^2
    std::vector<double> K_phi;  // radial/S^q planes: -phi_ss/phi
    std::vector<double> K_psi;  // radial/S^p planes: -psi_ss/psi
    std::vector<double> J;      // mixed S^p/S^q planes: -phi_s psi_s/(phi psi)
};

enum class EndClassification {
    InfiniteLength,
    ConeOverProduct,
    SpTimesDisk,   // phi -> 0: S^p x D^{q+1} cap
    SqTimesDisk,   // psi -> 0: S^q x D^{p+1} cap
    SmoothClosed,  // both factors bounded away from zero at the sampled end
    Indeterminate,
};

inline const char* to_string(EndClassification c) {
    switch (c) {
        case EndClassification::InfiniteLength: return "InfiniteLength";
        case EndClassification::ConeOverProduct: return "ConeOverProduct";
        case EndClassification::SpTimesDisk: return "SpTimesDisk";
        case EndClassification::SqTimesDisk: return "SqTimesDisk";
        case EndClassification::SmoothClosed: return "SmoothClosed";
        case EndClassification::Indeterminate: return "Indeterminate";
    }
    return "?";
}

struct EndReport {
    EndClassification tag = EndClassification::Indeterminate;
    double value_defect = 0.0;  // distance of the vanishing factor from 0
    double deriv_defect = 0.0;  // smoothness defect (|psi_s| resp. |phi_s - 1| style)
};

namespace detail {

// Quadratic extrapolation of nodal values to an endpoint abscissa.
inline double extrapolate_quadratic(double x0, double x1, double x2, double f0, double f1, double f2, double xq) {
    const double l0 = (xq - x1) * (xq - x2) / ((x0 - x1) * (x0 - x2));
    const double l1 = (xq - x0) * (xq - x2) / ((x1 - x0) * (x1 - x2));
    const double l2 = (xq - x0) * (xq - x1) / ((x2 - x0) * (x2 - x1));
    return l0 * f0 + l1 * f1 + l2 * f2;
}

/// Endpoint limit of a nodal ratio field that may be 0/0 at the end: quadratic
// extrapolation from the three nearest interior nodes.
inline double end_limit(std::span<const double> x, std::span<const double> ratio, bool left) {
    const std::size_t n = x.size();
    if (left) return extrapolate_quadratic(x[1], x[2], x[3], ratio[1], ratio[2], ratio[3], x[0]);
    return extrapolate_quadratic(x[n - 2], x[n - 3], x[n - 4], ratio[n - 2], ratio[n - 3], ratio[n - 4], x[n - 1]);
}

} // namespace detail

/// Sectional curvatures from one-sided/centered second-order stencils.
/// Where a warping factor vanishes at an end node, the 0/0 ratios are replaced
/// by their smooth limits via quadratic extrapolation from interior nodes.
inline CurvatureTuple compute_curvatures(const WarpedProfile& w) {
    w.validate();
    const auto psi_s = differentiate(w.s, w.psi, 1);
    const auto phi_s = differentiate(w.s, w.phi, 1);
    const auto psi_ss = differentiate(w.s, w.psi, 2);
    const auto phi_ss = differentiate(w.s, w.phi, 2);
    const std::size_t n = w.size();
    CurvatureTuple c;
    c.L_phi.resize(n);
    c.L_psi.resize(n);
    c.K_phi.resize(n);
    c.K_psi.resize(n);
    c.J.resize(n);
    const double tiny = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool phi_zero = w.phi[i] <= tiny, psi_zero = w.psi[i] <= tiny;
        c.L_phi[i] = phi_zero ? 0.0 : (1.0 - sq(phi_s[i])) / sq(w.phi[i]);
        c.L_psi[i] = psi_zero ? 0.0 : (1.0 - sq(psi_s[i])) / sq(w.psi[i]);
        c.K_phi[i] = phi_zero ? 0.0 : -phi_ss[i] / w.phi[i];
        c.K_psi[i] = psi_zero ? 0.0 : -psi_ss[i] / w.psi[i];
        c.J[i] = (phi_zero || psi_zero) ? 0.0 : -phi_s[i] * psi_s[i] / (w.phi[i] * w.psi[i]);
    }
    // smooth limits at vanishing ends
    auto fix_end = [&](std::size_t i, bool left) {
        if (w.phi[i] <= tiny) {
            c.K_phi[i] = detail::end_limit(w.s, c.K_phi, left);
            c.L_phi[i] = c.K_phi[i];  // smooth cap forces L_phi = K_phi at the pole
            c.J[i] = detail::end_limit(w.s, c.J, left);
        }
        if (w.psi[i] <= tiny) {
            c.K_psi[i] = detail::end_limit(w.s, c.K_psi, left);
            c.L_psi[i] = c.K_psi[i];
            c.J[i] = detail::end_limit(w.s, c.J, left);
        }
    };
    fix_end(0, true);
    fix_end(n - 1, false);
    return c;
}

/// Pointwise norm |Rm| = sqrt(sum over plane families of multiplicity *
/// curvature^2); multiplicities q(q-1)/2, p(p-1)/2, q, p, pq.
inline double riem_norm_at(int p, int q, double Lphi, double Lpsi, double Kphi, double Kpsi, double Jv) {
    return std::sqrt(0.5 * q * (q - 1) * sq(Lphi) + 0.5 * p * (p - 1) * sq(Lpsi) + q * sq(Kphi) + p * sq(Kpsi) +
                     double(p) * q * sq(Jv));
}

/// sup over nodes of the curvature norm.
inline double sup_riem(const WarpedProfile& w) {
    const auto c = compute_curvatures(w);
    double m = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        m = std::max(m, riem_norm_at(w.p, w.q, c.L_phi[i], c.L_psi[i], c.K_phi[i], c.K_psi[i], c.J[i]));
    return m;
}

/// Classify one end of the profile against the boundary-condition table.
/// `tol` is an absolute tolerance on endpoint values and derivative defects
/// for profiles normalized to O(1) scale.
inline EndReport classify_end(const WarpedProfile& w, bool left, double tol = 1e-6) {
    w.validate();
    const std::size_t n = w.size();
    const std::size_t e = left ? 0 : n - 1;

    // InfiniteLength: only diagnosable in the x-gauge, from non-integrable
    // growth of s' toward the end. Dyadic window integrals of s' that fail to
    // decay signal a divergent arclength.
    if (w.has_x_gauge()) {
        const double xe = w.x[e];
        const double span = w.x.back() - w.x.front();
        auto window_integral = [&](double a, double b) {
            double acc = 0.0;
            for (std::size_t i = 1; i < n; ++i) {
                const double lo = std::max(std::min(w.x[i - 1], w.x[i]), a);
                const double hi = std::min(std::max(w.x[i - 1], w.x[i]), b);
                if (hi > lo) {
                    const double m = 0.5 * (w.sprime[i] + w.sprime[i - 1]);
                    acc += m * (hi - lo);
                }
            }
            return acc;
        };
        double wlen = 0.25 * span;
        double prev = -1.0;
        int nondecaying = 0;
        for (int k = 0; k < 6; ++k, wlen *= 0.5) {
            const double a = left ? xe + 0.5 * wlen : xe - wlen;
            const double b = left ? xe + wlen : xe - 0.5 * wlen;
            const double I = window_integral(std::min(a, b), std::max(a, b));
            if (prev > 0.0 && I > 0.8 * prev) ++nondecaying;
            prev = I;
        }
        if (nondecaying >= 4) return {EndClassification::InfiniteLength, 0.0, 0.0};
    }

    const auto psi_s = differentiate(w.s, w.psi, 1);
    const auto phi_s = differentiate(w.s, w.phi, 1);
    const double psi0 = w.psi[e], phi0 = w.phi[e];
    const double dpsi = psi_s[e], dphi = phi_s[e];

    const bool psi_zero = psi0 < tol, phi_zero = phi0 < tol;
    if (psi_zero && phi_zero) {
        EndReport r{EndClassification::ConeOverProduct, std::max(psi0, phi0), 0.0};
        return r;
    }
    if (phi_zero) {
        EndReport r;
        r.tag = EndClassification::SpTimesDisk;
        r.value_defect = phi0;
        r.deriv_defect = std::max(std::abs(std::abs(dphi) - 1.0), std::abs(dpsi));
        if (r.deriv_defect > tol) r.tag = EndClassification::Indeterminate;
        return r;
    }
    if (psi_zero) {
        EndReport r;
        r.tag = EndClassification::SqTimesDisk;
        r.value_defect = psi0;
        r.deriv_defect = std::max(std::abs(std::abs(dpsi) - 1.0), std::abs(dphi));
        if (r.deriv_defect > tol) r.tag = EndClassification::Indeterminate;
        return r;
    }
    return {EndClassification::SmoothClosed, std::min(psi0, phi0), 0.0};
}

} // namespace warpflow
