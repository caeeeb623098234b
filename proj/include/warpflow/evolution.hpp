#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "warpflow/common.hpp"
#include "warpflow/geometry.hpp"
#include "warpflow/grid.hpp"

namespace warpflow {

/// Radial-gauge state: r = phi as coordinate, v = (phi_s)^2, h = psi^2.
/// r[0] == 0 is allowed and treated as the smooth rotation axis (v, h even).
struct RadialState {
    int p = 1;
    int q = 2;
    std::vector<double> r;
    std::vector<double> v;
    std::vector<double> h;

    std::size_t size() const { return r.size(); }

    void validate() const {
        if (p < 0 || q < 1) throw numerical_error("RadialState: need p >= 0, q >= 1");
        if (r.size() < 4 || v.size() != r.size() || h.size() != r.size())
            throw numerical_error("RadialState: field sizes");
        for (std::size_t i = 1; i < r.size(); ++i)
            if (!(r[i] > r[i - 1])) throw numerical_error("RadialState: r not increasing");
        if (r[0] < 0.0) throw numerical_error("RadialState: negative radius");
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (!(v[i] > 0.0)) throw numerical_error("RadialState: v must be positive");
            if (!(h[i] > 0.0)) throw numerical_error("RadialState: h must be positive");
        }
        if (r[0] == 0.0 && std::abs(v[0] - 1.0) > 1e-8)
            throw numerical_error("RadialState: smooth axis requires v(0) = 1");
    }
};

/// Time derivatives aligned with the input grid. Which fields are populated
/// depends on the producing operation; `drift` carries I[psi,phi] for the
/// arclength gauge.
struct RhsResult {
    std::vector<double> dpsi;
    std::vector<double> dphi;
    std::vector<double> dlog_sprime;
    std::vector<double> dv;
    std::vector<double> dh;
    std::vector<double> drift;
};

/// Scalar monitor f = (1 - sqrt(v))/r^2 and its exact evolution image.
struct FDiagnostic {
    std::vector<double> f;
    std::vector<double> rhs_f;
};

namespace detail {

struct SDerivs {
    std::vector<double> psi_s, phi_s, psi_ss, phi_ss;
};

// s-derivatives of psi and phi for either gauge. In the x-gauge,
// f_s = f_x/s', f_ss = f_xx/s'^2 - f_x s'_x/s'^3.
inline SDerivs s_derivatives(const WarpedProfile& w) {
    SDerivs d;
    if (!w.has_x_gauge()) {
        d.psi_s = differentiate(w.s, w.psi, 1);
        d.phi_s = differentiate(w.s, w.phi, 1);
        d.psi_ss = differentiate(w.s, w.psi, 2);
        d.phi_ss = differentiate(w.s, w.phi, 2);
        return d;
    }
    const auto psi_x = differentiate(w.x, w.psi, 1);
    const auto phi_x = differentiate(w.x, w.phi, 1);
    const auto psi_xx = differentiate(w.x, w.psi, 2);
    const auto phi_xx = differentiate(w.x, w.phi, 2);
    const auto sp_x = differentiate(w.x, w.sprime, 1);
    const std::size_t n = w.size();
    d.psi_s.resize(n);
    d.phi_s.resize(n);
    d.psi_ss.resize(n);
    d.phi_ss.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double sp = w.sprime[i], sp2 = sp * sp, sp3 = sp2 * sp;
        d.psi_s[i] = psi_x[i] / sp;
        d.phi_s[i] = phi_x[i] / sp;
        d.psi_ss[i] = psi_xx[i] / sp2 - psi_x[i] * sp_x[i] / sp3;
        d.phi_ss[i] = phi_xx[i] / sp2 - phi_x[i] * sp_x[i] / sp3;
    }
    return d;
}

// Ratio g/f where both may vanish smoothly at an end node: interior nodes
// divide directly, end nodes take the quadratic-extrapolated limit.
inline void patch_vanishing_end(std::span<const double> s, std::vector<double>& ratio, std::size_t e, bool left) {
    ratio[e] = detail::end_limit(s, ratio, left);
}

// Second derivative at an end node of a field that is even about that end
// (the surviving factor at a smooth cap): fit f0 + a d^2 + b d^4 through the
// two neighbors, f'' = 2a. One-sided stencils put an anti-diffusive self
// coupling on the cap node, which an explicit step turns into a localized
// blowup; the even fit keeps the diffusive sign and is O(d^4) accurate.
inline double even_end_second(std::span<const double> s, std::span<const double> f, bool left) {
    const std::size_t n = s.size();
    const std::size_t e = left ? 0 : n - 1;
    const std::size_t i1 = left ? 1 : n - 2, i2 = left ? 2 : n - 3;
    const double d1s = sq(s[i1] - s[e]), d2s = sq(s[i2] - s[e]);
    const double g1 = f[i1] - f[e], g2 = f[i2] - f[e];
    return 2.0 * (g1 * d2s * d2s - g2 * d1s * d1s) / (d1s * d2s * (d2s - d1s));
}

} // namespace detail

/// Right-hand sides at fixed flat coordinate x (also valid for arclength
/// profiles, where they coincide with the fixed-x derivative of the evolving
/// parametrization). Uses the grouped forms
///   dpsi = psi_ss + q (phi_s/phi) psi_s + (p-1)(psi_s^2 - 1)/psi
///   dphi = phi_ss + p (psi_s/psi) phi_s + (q-1)(phi_s^2 - 1)/phi
///   dlog_sprime = p psi_ss/psi + q phi_ss/phi
/// which stay regular at smooth caps; vanishing end nodes get their parity
/// limits (dphi = 0 at a phi-cap, etc.). The surviving factor at a cap is
/// even about it, so its end-node second derivative comes from the
/// even-extension fit rather than a one-sided stencil.
/// `truncate_right` imposes a zero-curvature condition at the last node
/// (second derivatives dropped, reaction and convection kept), for profiles
/// cut off inside an asymptotic region; it is exact on a product cylinder.
inline RhsResult rhs_fixed_x(const WarpedProfile& w, bool truncate_right = false) {
    w.validate();
    auto d = detail::s_derivatives(w);
    const std::size_t n = w.size();
    RhsResult out;
    out.dpsi.resize(n);
    out.dphi.resize(n);
    out.dlog_sprime.resize(n);

    for (std::size_t e : {std::size_t{0}, n - 1}) {
        if (n < 4) break;
        const bool left = e == 0;
        if (w.phi[e] == 0.0 && w.psi[e] > 0.0) {
            d.psi_ss[e] = detail::even_end_second(w.s, w.psi, left);
            d.psi_s[e] = 0.0;
        } else if (w.psi[e] == 0.0 && w.phi[e] > 0.0) {
            d.phi_ss[e] = detail::even_end_second(w.s, w.phi, left);
            d.phi_s[e] = 0.0;
        }
    }

    std::vector<double> kphi(n), kpsi(n);  // phi_ss/phi, psi_ss/psi
    for (std::size_t i = 0; i < n; ++i) {
        kphi[i] = w.phi[i] > 0.0 ? d.phi_ss[i] / w.phi[i] : 0.0;
        kpsi[i] = w.psi[i] > 0.0 ? d.psi_ss[i] / w.psi[i] : 0.0;
    }
    for (std::size_t e : {std::size_t{0}, n - 1}) {
        const bool left = e == 0;
        if (w.phi[e] == 0.0) detail::patch_vanishing_end(w.s, kphi, e, left);
        if (w.psi[e] == 0.0) detail::patch_vanishing_end(w.s, kpsi, e, left);
    }

    for (std::size_t i = 0; i < n; ++i) {
        const bool phi_zero = w.phi[i] == 0.0, psi_zero = w.psi[i] == 0.0;
        if (!phi_zero && !psi_zero) {
            out.dpsi[i] = d.psi_ss[i] + w.q * (d.phi_s[i] / w.phi[i]) * d.psi_s[i] +
                          (w.p - 1) * (sq(d.psi_s[i]) - 1.0) / w.psi[i];
            out.dphi[i] = d.phi_ss[i] + w.p * (d.psi_s[i] / w.psi[i]) * d.phi_s[i] +
                          (w.q - 1) * (sq(d.phi_s[i]) - 1.0) / w.phi[i];
        } else if (phi_zero && !psi_zero) {
            // smooth phi-cap: phi pinned at 0, psi feels (1+q) psi_ss - (p-1)/psi
            out.dphi[i] = 0.0;
            out.dpsi[i] = (1.0 + w.q) * d.psi_ss[i] - (w.p - 1) / w.psi[i];
        } else if (psi_zero && !phi_zero) {
            out.dpsi[i] = 0.0;
            out.dphi[i] = (1.0 + w.p) * d.phi_ss[i] - (w.q - 1) / w.phi[i];
        } else {
            out.dphi[i] = out.dpsi[i] = 0.0;
        }
        out.dlog_sprime[i] = w.p * kpsi[i] + w.q * kphi[i];
    }
    if (truncate_right && w.phi[n - 1] > 0.0 && w.psi[n - 1] > 0.0) {
        const std::size_t i = n - 1;
        out.dpsi[i] = w.q * (d.phi_s[i] / w.phi[i]) * d.psi_s[i] +
                      (w.p - 1) * (sq(d.psi_s[i]) - 1.0) / w.psi[i];
        out.dphi[i] = w.p * (d.psi_s[i] / w.psi[i]) * d.phi_s[i] +
                      (w.q - 1) * (sq(d.phi_s[i]) - 1.0) / w.phi[i];
        out.dlog_sprime[i] = 0.0;
    }
    return out;
}

/// Right-hand sides at fixed arclength. The drift integral
///   I(s) = int_0^s (p psi_ss/psi + q phi_ss/phi) ds
/// is accumulated by the trapezoid rule from the anchor end (s[0]);
/// dpsi|_s = dpsi|_x - I psi_s and likewise for phi.
/// If `appendix_form` is set, psi is treated in the psi = s(1+psi~) class and
/// the p-part of the drift is rewritten by the integration-by-parts identity
/// so only quadratic remainders are integrated. A non-integrable integrand
/// (a factor vanishing at the anchor end without its smooth-cap derivative)
/// raises numerical_error.
inline RhsResult rhs_fixed_s(const WarpedProfile& w, bool appendix_form = false) {
    w.validate();
    const auto d = detail::s_derivatives(w);
    const std::size_t n = w.size();

    auto fx = rhs_fixed_x(w);

    std::vector<double> integrand(n);
    const double tol_cap = 0.05;
    for (std::size_t i = 0; i < n; ++i) {
        const double fphi = w.phi[i] > 0.0 ? d.phi_ss[i] / w.phi[i] : 0.0;
        const double fpsi = w.psi[i] > 0.0 ? d.psi_ss[i] / w.psi[i] : 0.0;
        integrand[i] = w.p * fpsi + w.q * fphi;
    }
    // singularity screen at the anchor end: a vanishing factor whose cap
    // defect is large makes phi_ss/phi (resp. psi_ss/psi) non-integrable
    if (w.phi[0] < 1e-12 * std::max(1.0, w.phi.back())) {
        if (std::abs(std::abs(d.phi_s[0]) - 1.0) > tol_cap)
            throw numerical_error("rhs_fixed_s: drift integrand singular at s[0] (conical phi end)");
        detail::patch_vanishing_end(w.s, integrand, 0, true);
    }
    if (w.psi[0] < 1e-12 * std::max(1.0, w.psi.back())) {
        if (!appendix_form && std::abs(std::abs(d.psi_s[0]) - 1.0) > tol_cap)
            throw numerical_error("rhs_fixed_s: drift integrand singular at s[0] (conical psi end)");
        if (!appendix_form) detail::patch_vanishing_end(w.s, integrand, 0, true);
    }

    RhsResult out;
    out.drift.resize(n);
    if (!appendix_form) {
        out.drift = cumtrapz(w.s, integrand);
    } else {
        // psi = s(1+u): p psi_ss/psi = p (2u_s + s u_ss)/(s(1+u)); integrate by
        // parts so the integrated term is p*psi_s/psi - p/s and the remaining
        // integrand is quadratic in gradients:
        //   I = [p psi_s/psi - p/s + q phi_s/phi]_0^s
        //       - int ( p (psi_s/psi)^2 - p/s^2 + q (phi_s/phi)^2 ) ds   ... with
        // the -p/s^2 piece absorbed against (psi_s/psi)^2 via the u-variables.
        std::vector<double> quad(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = w.s[i];
            if (s <= 0.0) throw numerical_error("rhs_fixed_s: appendix form needs s > 0");
            const double u = w.psi[i] / s - 1.0;
            const double us = (d.psi_s[i] - w.psi[i] / s) / s;  // u_s = (psi_s - psi/s)/s
            const double psip_over_psi = d.psi_s[i] / w.psi[i];
            const double phip_over_phi = d.phi_s[i] / w.phi[i];
            // (psi_s/psi)^2 - 1/s^2 = (psi_s/psi - 1/s)(psi_s/psi + 1/s): both factors finite
            const double diff = us / (1.0 + u);  // psi_s/psi - 1/s
            quad[i] = w.p * diff * (psip_over_psi + 1.0 / s) + w.q * sq(phip_over_phi);
        }
        const auto Q = cumtrapz(w.s, quad);
        for (std::size_t i = 0; i < n; ++i) {
            const double boundary = w.p * (d.psi_s[i] / w.psi[i] - 1.0 / w.s[i]) + w.q * d.phi_s[i] / w.phi[i];
            const double boundary0 = w.p * (d.psi_s[0] / w.psi[0] - 1.0 / w.s[0]) + w.q * d.phi_s[0] / w.phi[0];
            out.drift[i] = boundary - boundary0 - (Q[i] - Q[0]);
        }
    }

    out.dpsi.resize(n);
    out.dphi.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.dpsi[i] = fx.dpsi[i] - out.drift[i] * d.psi_s[i];
        out.dphi[i] = fx.dphi[i] - out.drift[i] * d.phi_s[i];
    }
    return out;
}

/// Resample an arclength profile onto a radial grid r = phi. phi must be
/// strictly increasing on the sampled range.
inline RadialState to_radial(const WarpedProfile& w, std::size_t n_nodes = 0) {
    w.validate();
    const std::size_t n = w.size();
    for (std::size_t i = 1; i < n; ++i)
        if (!(w.phi[i] > w.phi[i - 1]))
            throw numerical_error("to_radial: phi not strictly increasing on [" + std::to_string(w.s[i - 1]) +
                                  ", " + std::to_string(w.s[i]) + "]");
    const auto phi_s = differentiate(w.s, w.phi, 1);
    RadialState st;
    st.p = w.p;
    st.q = w.q;
    if (n_nodes == 0) {
        // native mode: keep r_i = phi(s_i), no resampling error
        st.r = w.phi;
        st.v.resize(n);
        st.h.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            st.v[i] = sq(phi_s[i]);
            st.h[i] = sq(w.psi[i]);
        }
        return st;
    }
    std::vector<double> vfield(n), hfield(n);
    for (std::size_t i = 0; i < n; ++i) {
        vfield[i] = sq(phi_s[i]);
        hfield[i] = sq(w.psi[i]);
    }
    const auto vi = HermiteSeries::pchip(w.phi, vfield);
    const auto hi = HermiteSeries::pchip(w.phi, hfield);
    st.r.resize(n_nodes);
    st.v.resize(n_nodes);
    st.h.resize(n_nodes);
    for (std::size_t j = 0; j < n_nodes; ++j) {
        const double r = w.phi.front() + (w.phi.back() - w.phi.front()) * double(j) / double(n_nodes - 1);
        st.r[j] = r;
        st.v[j] = vi(r);
        st.h[j] = hi(r);
    }
    return st;
}

/// Rebuild an arclength profile from a radial state: s(r) = int dr/sqrt(v),
/// psi = sqrt(h), phi = r.
inline WarpedProfile from_radial(const RadialState& st) {
    st.validate();
    const std::size_t n = st.size();
    std::vector<double> integrand(n);
    for (std::size_t i = 0; i < n; ++i) integrand[i] = 1.0 / std::sqrt(st.v[i]);
    WarpedProfile w;
    w.p = st.p;
    w.q = st.q;
    w.s = cumtrapz(st.r, integrand);
    w.phi = st.r;
    w.psi.resize(n);
    for (std::size_t i = 0; i < n; ++i) w.psi[i] = std::sqrt(st.h[i]);
    w.validate();
    return w;
}

/// The two reaction-diffusion operators of the radial gauge:
///   G^(v) = v v_rr - v_r^2/2 + (q-1-v) v_r/r + a_q^2 v(1-v)/r^2 - 2 p u v/h
///   G^(h) = v h_rr + (q-1+v) h_r/r - 4u - a_p^2
/// with a_d^2 = 2(d-1). u is the coupling field (psi_s)^2; pass u computed
/// from the state via rhs_radial, or any test value for barrier sweeps.
/// r = 0 uses the even-parity limits: G^(v)(0) = 0, G^(h)(0) = (1+q) h_rr - a_p^2.
struct GOps {
    std::vector<double> gv;
    std::vector<double> gh;
};

inline GOps g_ops(const RadialState& st, std::span<const double> u) {
    st.validate();
    const std::size_t n = st.size();
    if (u.size() != n) throw numerical_error("g_ops: u size mismatch");
    const double aq2 = alpha_sq(st.q), ap2 = alpha_sq(st.p);
    const auto v_r = differentiate(st.r, st.v, 1);
    const auto v_rr = differentiate(st.r, st.v, 2);
    const auto h_r = differentiate(st.r, st.h, 1);
    const auto h_rr = differentiate(st.r, st.h, 2);
    GOps out;
    out.gv.resize(n);
    out.gh.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = st.r[i], v = st.v[i], h = st.h[i];
        if (r == 0.0) {
            out.gv[i] = 0.0;  // smooth axis: all terms cancel, v(0)=1 preserved
            out.gh[i] = (1.0 + st.q) * h_rr[i] - ap2;
            continue;
        }
        out.gv[i] = v * v_rr[i] - 0.5 * sq(v_r[i]) + (st.q - 1 - v) * v_r[i] / r + aq2 * v * (1.0 - v) / (r * r) -
                    2.0 * st.p * u[i] * v / h;
        out.gh[i] = v * h_rr[i] + (st.q - 1 + v) * h_r[i] / r - 4.0 * u[i] - ap2;
    }
    return out;
}

/// Coupling field u = (psi_s)^2 = v h_r^2 / (4h) from the state itself.
inline std::vector<double> coupling_u(const RadialState& st) {
    const auto h_r = differentiate(st.r, st.h, 1);
    std::vector<double> u(st.size());
    for (std::size_t i = 0; i < st.size(); ++i) u[i] = st.v[i] * sq(h_r[i]) / (4.0 * st.h[i]);
    return u;
}

/// Radial-gauge time derivatives dv = G^(v), dh = G^(h) with the state's own
/// coupling field.
inline RhsResult rhs_radial(const RadialState& st) {
    const auto u = coupling_u(st);
    auto g = g_ops(st, u);
    RhsResult out;
    out.dv = std::move(g.gv);
    out.dh = std::move(g.gh);
    return out;
}

/// Monitor f = (1-sqrt(v))/r^2 and its evolution image, the exact chain-rule
/// transport of G^(v):
///   f_t = v f_rr + [(q+2)/r - 6 r f + 3 r^3 f^2] f_r
///         + [3(q-1) + (1-q) r^2 f] f^2 + p u (1 - r^2 f)/(h r^2).
/// At r = 0 (smooth axis) the even-parity limits apply.
inline FDiagnostic f_evolution(const RadialState& st) {
    st.validate();
    const std::size_t n = st.size();
    const auto u = coupling_u(st);
    FDiagnostic out;
    out.f.resize(n);
    out.rhs_f.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = st.r[i];
        if (r == 0.0) {
            out.f[i] = 0.0;  // placeholder, fixed below from the limit
            continue;
        }
        out.f[i] = (1.0 - std::sqrt(st.v[i])) / (r * r);
    }
    if (st.r[0] == 0.0) out.f[0] = detail::end_limit(st.r, out.f, true);

    const auto f_r = differentiate(st.r, out.f, 1);
    const auto f_rr = differentiate(st.r, out.f, 2);
    const auto h_rr = differentiate(st.r, st.h, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = st.r[i], f = out.f[i], h = st.h[i];
        if (r == 0.0) {
            // parity limits: f_r(0) = 0 so (q+2)/r * f_r -> (q+2) f_rr(0);
            // h_r(0) = 0 so u/r^2 -> v h_rr(0)^2/(4h)
            const double u_over_r2 = st.v[0] * sq(h_rr[0]) / (4.0 * st.h[0]);
            out.rhs_f[i] = (st.v[0] + st.q + 2) * f_rr[i] + 3.0 * (st.q - 1) * sq(f) + st.p * u_over_r2 / st.h[0];
            continue;
        }
        out.rhs_f[i] = st.v[i] * f_rr[i] + ((st.q + 2) / r - 6.0 * r * f + 3.0 * r * r * r * f * f) * f_r[i] +
                       (3.0 * (st.q - 1) + (1.0 - st.q) * r * r * f) * sq(f) +
                       st.p * u[i] * (1.0 - r * r * f) / (h * r * r);
    }
    return out;
}

/// Gradient-bound report for an arclength profile: sup of v = (phi_s)^2 and
/// u = (psi_s)^2 with their locations, and nodes exceeding 1 + tol.
struct GradientReport {
    double sup_v = 0.0, sup_u = 0.0;
    double argmax_v = 0.0, argmax_u = 0.0;
    std::vector<std::size_t> violations;
};

inline GradientReport gradient_monitor(const WarpedProfile& w, double tol = 1e-6) {
    w.validate();
    const auto d = detail::s_derivatives(w);
    GradientReport rep;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double v = sq(d.phi_s[i]), u = sq(d.psi_s[i]);
        if (v > rep.sup_v) {
            rep.sup_v = v;
            rep.argmax_v = w.s[i];
        }
        if (u > rep.sup_u) {
            rep.sup_u = u;
            rep.argmax_u = w.s[i];
        }
        if (v > 1.0 + tol || u > 1.0 + tol) rep.violations.push_back(i);
    }
    return rep;
}

} // namespace warpflow
