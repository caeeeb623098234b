#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <future>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "warpflow/barriers.hpp"
#include "warpflow/evolution.hpp"

// Time integration of the warped-product flow. One explicit SSP-RK2 (Heun)
// stepper drives every run; the global mode evolves (psi, phi, s') at fixed
// flat coordinate x, and a radial mode evolves (v, h) on a fixed r-grid for
// tip studies. Monitors (gradient bounds, curvature, barrier trapping,
// phi-monotonicity) ride along the step loop and emit typed events; regrids
// keep the contracting or expanding tip scale resolved. Post-run reports
// (singularity extrapolation, crossing time, regime fits) consume the
// trajectory record.

namespace warpflow {

// ---------------------------------------------------------------------------
// trajectory record

enum class RunStatus { ReachedTEnd, Singular, Crossed, NumericalFailure, StepLimit };

inline const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::ReachedTEnd: return "reached_t_end";
        case RunStatus::Singular: return "singular";
        case RunStatus::Crossed: return "crossed";
        case RunStatus::NumericalFailure: return "numerical_failure";
        case RunStatus::StepLimit: return "step_limit";
    }
    return "unknown";
}

enum class EventKind { BarrierCrossing, GradientViolation, SingularityDetected, MonotonicityLoss };

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::BarrierCrossing: return "BarrierCrossing";
        case EventKind::GradientViolation: return "GradientViolation";
        case EventKind::SingularityDetected: return "SingularityDetected";
        case EventKind::MonotonicityLoss: return "MonotonicityLoss";
    }
    return "unknown";
}

struct TrajectoryEvent {
    EventKind kind = EventKind::SingularityDetected;
    double t = 0.0;
    long long step = 0;
    double r = 0.0;      // radius of the offending node, run units
    double value = 0.0;  // kind-specific magnitude (excess, sup value, ...)
    bool on_parabolic_boundary = false;
    std::string detail;
};

inline json to_json(const TrajectoryEvent& e) {
    json j;
    j["kind"] = to_string(e.kind);
    j["t"] = e.t;
    j["step"] = e.step;
    j["r"] = e.r;
    j["value"] = e.value;
    if (e.kind == EventKind::BarrierCrossing) j["on_parabolic_boundary"] = e.on_parabolic_boundary;
    j["detail"] = e.detail;
    return j;
}

struct Snapshot {
    double t = 0.0;
    long long step = 0;
    WarpedProfile w;
};

struct RegridRecord {
    double t = 0.0;
    long long step = 0;
    std::size_t n_before = 0, n_after = 0;
    double dx0 = 0.0; // finest spacing of the rebuilt grid
};

inline json to_json(const RegridRecord& r) {
    json j;
    j["t"] = r.t;
    j["step"] = r.step;
    j["n_before"] = r.n_before;
    j["n_after"] = r.n_after;
    j["dx0"] = r.dx0;
    return j;
}

enum class TipScaleKind { None, ForwardBox, Pinch };

struct StepControls {
    double cfl = 0.8; // fraction of the explicit diffusion limit, in (0, 1)
    double dt_fixed = 0.0;          // > 0 bypasses the CFL/reaction choice
    double reaction_factor = 0.05;  // dt <= factor * field/|d field|
    double t_start = 0.0;
    double t_end = 0.0;
    long long max_steps = 40'000'000;
    double rm_ceiling = 1e8; // sup|Rm| halt; <= 0 disables the ceiling
    double grad_tol = 1e-6;
    int monitor_stride = 16;  // trapping / monotonicity cadence, in steps
    int curvature_stride = 16;
    bool freeze_right = false;     // pin the last node (quasi-static far field)
    bool halt_on_crossing = false; // stop at the first barrier/monotonicity event
    double barrier_time_offset = 0.0; // box clock = run clock + offset

    // regridding: keep the tip scale resolved by [regrid_lo, regrid_hi] nodes,
    // rebuild at regrid_target nodes per scale
    TipScaleKind tip_scale = TipScaleKind::None;
    double regrid_lo = 9.0, regrid_hi = 13.0, regrid_target = 11.0;
    double grid_ratio = 1.05;
    double grid_dx_max = 0.0; // coarse-end spacing of rebuilt grids
    double ts_tau_star = 0.0; // ForwardBox: box depth, at(T) = -tau_star - log T
    double ts_c0 = 0.5;       // ForwardBox: tip scale = sqrt(T/at)/c0

    std::vector<double> snapshot_times; // run-clock targets, sorted ascending
};

inline json to_json(const StepControls& c) {
    json j;
    j["cfl"] = c.cfl;
    j["dt_fixed"] = c.dt_fixed;
    j["reaction_factor"] = c.reaction_factor;
    j["t_start"] = c.t_start;
    j["t_end"] = c.t_end;
    j["max_steps"] = c.max_steps;
    j["rm_ceiling"] = c.rm_ceiling;
    j["grad_tol"] = c.grad_tol;
    j["monitor_stride"] = c.monitor_stride;
    j["curvature_stride"] = c.curvature_stride;
    j["freeze_right"] = c.freeze_right;
    j["halt_on_crossing"] = c.halt_on_crossing;
    j["barrier_time_offset"] = c.barrier_time_offset;
    j["tip_scale"] = c.tip_scale == TipScaleKind::None      ? "none"
                     : c.tip_scale == TipScaleKind::ForwardBox ? "forward_box"
                                                               : "pinch";
    j["regrid_lo"] = c.regrid_lo;
    j["regrid_hi"] = c.regrid_hi;
    j["regrid_target"] = c.regrid_target;
    j["grid_ratio"] = c.grid_ratio;
    j["grid_dx_max"] = c.grid_dx_max;
    return j;
}

struct FlowTrajectory {
    RunStatus status = RunStatus::ReachedTEnd;
    std::string halt_detail;
    double t_final = 0.0;
    long long steps = 0;
    double dt_last = 0.0;
    double max_sup_v = 0.0, max_sup_u = 0.0; // running maxima over every step
    std::vector<Snapshot> snapshots;         // always holds the last good state
    std::vector<TrajectoryEvent> events;
    std::vector<RegridRecord> regrids;
    std::vector<std::pair<double, double>> sup_rm; // (t, sup|Rm|) samples

    const WarpedProfile& final_profile() const { return snapshots.back().w; }
};

inline json trajectory_meta_json(const FlowTrajectory& tr, const StepControls& ctl) {
    json j;
    j["status"] = to_string(tr.status);
    j["halt_detail"] = tr.halt_detail;
    j["t_final"] = tr.t_final;
    j["steps"] = tr.steps;
    j["dt_last"] = tr.dt_last;
    j["max_sup_v"] = tr.max_sup_v;
    j["max_sup_u"] = tr.max_sup_u;
    j["n_snapshots"] = tr.snapshots.size();
    j["controls"] = to_json(ctl);
    j["events"] = json::array();
    for (const auto& e : tr.events) j["events"].push_back(to_json(e));
    j["regrids"] = json::array();
    for (const auto& r : tr.regrids) j["regrids"].push_back(to_json(r));
    return j;
}

// ---------------------------------------------------------------------------
// step loop internals

namespace solver_detail {

// Radial view of an x-gauge state for the pointwise monitors. Skips the axis
// node (phi = 0) and performs no validation; the caller has already confirmed
// phi is increasing on the viewed range.
//
// Beside an exact tip (phi(0) = 0) the generic stencil error in phi_s is
// O(ds^2), which the near-axis envelope comparison amplifies by 1/zeta^2 past
// the corridor width. phi is odd about the cap, so the first three slopes are
// refit with the odd quintic a s + b s^3 + c s^5 through nodes 1..3, accurate
// to O(ds^6) and exact for any smooth cap to that order.
inline RadialState radial_view(const WarpedProfile& w) {
    const auto phi_s = differentiate(w.s, w.phi, 1);
    RadialState st;
    st.p = w.p;
    st.q = w.q;
    const std::size_t n = w.size();
    st.r.reserve(n);
    st.v.reserve(n);
    st.h.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(w.phi[i] > 0.0)) continue;
        st.r.push_back(w.phi[i]);
        st.v.push_back(sq(phi_s[i]));
        st.h.push_back(sq(w.psi[i]));
    }
    if (n >= 5 && w.phi[0] == 0.0 && st.size() == n - 1 && st.r.size() >= 3) {
        const double s0 = w.s[0];
        double t[3], f[3];
        const double span = w.s[3] - s0;
        for (int i = 0; i < 3; ++i) {
            t[i] = (w.s[i + 1] - s0) / span;
            f[i] = w.phi[i + 1] / span;
        }
        // rows t, t^3, t^5; unknowns A = a, B = b span^2, C = c span^4
        double m[3][4];
        for (int i = 0; i < 3; ++i) {
            const double t2 = t[i] * t[i];
            m[i][0] = t[i];
            m[i][1] = t[i] * t2;
            m[i][2] = m[i][1] * t2;
            m[i][3] = f[i];
        }
        for (int col = 0; col < 3; ++col) {
            int piv = col;
            for (int r = col + 1; r < 3; ++r)
                if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
            for (int c2 = 0; c2 < 4; ++c2) std::swap(m[col][c2], m[piv][c2]);
            for (int r = col + 1; r < 3; ++r) {
                const double fac = m[r][col] / m[col][col];
                for (int c2 = col; c2 < 4; ++c2) m[r][c2] -= fac * m[col][c2];
            }
        }
        double coef[3];
        for (int r = 2; r >= 0; --r) {
            double acc = m[r][3];
            for (int c2 = r + 1; c2 < 3; ++c2) acc -= m[r][c2] * coef[c2];
            coef[r] = acc / m[r][r];
        }
        for (int i = 0; i < 3; ++i) {
            const double t2 = t[i] * t[i];
            st.v[i] = sq(coef[0] + 3.0 * coef[1] * t2 + 5.0 * coef[2] * t2 * t2);
        }
    }
    return st;
}

// First index where phi stops increasing, or npos. Scanned only below r_max.
inline std::size_t monotonicity_break(const WarpedProfile& w, double r_max) {
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        if (w.phi[i] >= r_max) break;
        if (!(w.phi[i + 1] > w.phi[i])) return i;
    }
    return static_cast<std::size_t>(-1);
}

// First-derivative coefficient of an odd function from two samples, f = a d +
// b d^3 fitted at distances d1 < d2 from the symmetry point.
inline double odd_parity_slope(double d1, double d2, double f1, double f2) {
    return (f1 * d2 * d2 * d2 - f2 * d1 * d1 * d1) / (d1 * d2 * (d2 * d2 - d1 * d1));
}

struct GradSup {
    double sup_v = 0.0, sup_u = 0.0;
};

// sup of phi_s^2 and psi_s^2. A field that vanishes exactly at an end is a
// smooth cap: it is odd about the pole, where generic one-sided stencils
// overshoot the saturated slope 1 by O(ds^2); the parity fit removes that.
inline GradSup gradient_sup(const std::vector<double>& s, const std::vector<double>& psi,
                            const std::vector<double>& phi) {
    const auto psi_s = differentiate(s, psi, 1);
    const auto phi_s = differentiate(s, phi, 1);
    const std::size_t n = s.size();
    GradSup g;
    auto cap_slope = [&](const std::vector<double>& f, bool left) {
        if (left) return odd_parity_slope(s[1] - s[0], s[2] - s[0], f[1], f[2]);
        return odd_parity_slope(s[n - 1] - s[n - 2], s[n - 1] - s[n - 3], -f[n - 2], -f[n - 3]);
    };
    for (std::size_t i = 0; i < n; ++i) {
        double vs = phi_s[i], us = psi_s[i];
        if (i == 0 || i == n - 1) {
            const bool left = i == 0;
            if (phi[i] == 0.0) vs = cap_slope(phi, left);
            if (psi[i] == 0.0) us = cap_slope(psi, left);
        }
        g.sup_v = std::max(g.sup_v, sq(vs));
        g.sup_u = std::max(g.sup_u, sq(us));
    }
    return g;
}

inline double min_spacing(const std::vector<double>& s) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < s.size(); ++i) m = std::min(m, s[i] - s[i - 1]);
    return m;
}

struct StepWork {
    std::vector<double> psi1, phi1, sp1, s1;
};

} // namespace solver_detail

// Face radius of the validity box in run (rescaled) units.
inline double face_radius(const BarrierConstants& c) {
    return std::exp(c.log_r_star - 0.5 * c.tau_star);
}

// ---------------------------------------------------------------------------
// fixed-coordinate integration

// Explicit SSP-RK2 on (psi, phi, s') at fixed x. The diffusion limit uses the
// stiffest cap coefficient (1 + max(p, q)) so pole nodes stay stable; the
// reaction limit keeps vanishing factors from overshooting through zero in
// one step. Returns the last good state on any failure instead of throwing.
inline FlowTrajectory integrate(const WarpedProfile& w0, const StepControls& ctl,
                                const BarrierSuite* suite = nullptr) {
    w0.validate();
    if (!w0.has_x_gauge()) throw config_error("integrate: profile must carry the x gauge");
    if (!(ctl.t_end > ctl.t_start)) throw config_error("integrate: need t_end > t_start");
    if (ctl.dt_fixed <= 0.0 && !(ctl.cfl > 0.0 && ctl.cfl < 1.0))
        throw config_error("integrate: cfl must lie in (0, 1)");

    FlowTrajectory tr;
    const int p = w0.p, q = w0.q;
    const std::size_t cap = 48'000; // sup|Rm| sample budget before decimation
    std::vector<double> x = w0.x, sp = w0.sprime, psi = w0.psi, phi = w0.phi;
    double t = ctl.t_start;
    long long step = 0;
    const double face_r = suite ? face_radius(suite->c) : 0.0;
    const double t_eps = 1e-12 * std::abs(ctl.t_end);
    bool grad_flagged = false, mono_flagged = false, cross_flagged = false;
    std::size_t next_snapshot = 0;

    auto make_profile = [&]() {
        return WarpedProfile::from_x_gauge(p, q, x, sp, psi, phi);
    };
    auto snapshot = [&](const char*) {
        tr.snapshots.push_back({t, step, make_profile()});
    };
    auto record_rm = [&](double val) {
        tr.sup_rm.emplace_back(t, val);
        if (tr.sup_rm.size() > cap) {
            std::vector<std::pair<double, double>> kept;
            kept.reserve(cap / 2 + 1);
            for (std::size_t i = 0; i < tr.sup_rm.size(); i += 2) kept.push_back(tr.sup_rm[i]);
            tr.sup_rm.swap(kept);
        }
    };

    WarpedProfile w = make_profile();
    snapshot("initial");
    {
        const double rm0 = sup_riem(w);
        record_rm(rm0);
    }

    solver_detail::StepWork wk;
    wk.psi1.resize(psi.size());
    wk.phi1.resize(psi.size());
    wk.sp1.resize(psi.size());

    auto halt = [&](RunStatus st, std::string detail) {
        tr.status = st;
        tr.halt_detail = std::move(detail);
        tr.t_final = t;
        tr.steps = step;
        if (tr.snapshots.empty() || tr.snapshots.back().t != t || tr.snapshots.back().step != step)
            snapshot("final");
    };

    while (true) {
        if (t >= ctl.t_end - t_eps) {
            halt(RunStatus::ReachedTEnd, "reached t_end");
            return tr;
        }
        if (step >= ctl.max_steps) {
            halt(RunStatus::StepLimit, "step budget exhausted");
            return tr;
        }

        RhsResult r0;
        try {
            r0 = rhs_fixed_x(w);
        } catch (const std::exception& ex) {
            halt(RunStatus::NumericalFailure, std::string("rhs failure: ") + ex.what());
            return tr;
        }
        const std::size_t n = psi.size();
        if (ctl.freeze_right) {
            r0.dpsi[n - 1] = 0.0;
            r0.dphi[n - 1] = 0.0;
            r0.dlog_sprime[n - 1] = 0.0;
        }

        double dt;
        if (ctl.dt_fixed > 0.0) {
            dt = ctl.dt_fixed;
        } else {
            double ds_min = std::numeric_limits<double>::infinity();
            for (std::size_t i = 1; i < n; ++i) ds_min = std::min(ds_min, w.s[i] - w.s[i - 1]);
            dt = ctl.cfl * ds_min * ds_min / (2.0 * (1.0 + std::max(p, q)));
            for (std::size_t i = 0; i < n; ++i) {
                if (psi[i] > 0.0 && r0.dpsi[i] != 0.0)
                    dt = std::min(dt, ctl.reaction_factor * psi[i] / std::abs(r0.dpsi[i]));
                if (phi[i] > 0.0 && r0.dphi[i] != 0.0)
                    dt = std::min(dt, ctl.reaction_factor * phi[i] / std::abs(r0.dphi[i]));
            }
        }
        dt = std::min(dt, ctl.t_end - t);
        if (!(dt > 0.0) || !std::isfinite(dt)) {
            halt(RunStatus::NumericalFailure, "step size collapsed");
            return tr;
        }

        // Heun: full Euler stage, then average the endpoint slopes
        for (std::size_t i = 0; i < n; ++i) {
            wk.psi1[i] = psi[i] + dt * r0.dpsi[i];
            wk.phi1[i] = phi[i] + dt * r0.dphi[i];
            wk.sp1[i] = sp[i] * (1.0 + dt * r0.dlog_sprime[i]);
        }
        WarpedProfile w1;
        RhsResult r1;
        try {
            w1 = WarpedProfile::from_x_gauge(p, q, x, wk.sp1, wk.psi1, wk.phi1);
            r1 = rhs_fixed_x(w1);
        } catch (const std::exception& ex) {
            halt(RunStatus::NumericalFailure, std::string("stage failure: ") + ex.what());
            return tr;
        }
        if (ctl.freeze_right) {
            r1.dpsi[n - 1] = 0.0;
            r1.dphi[n - 1] = 0.0;
            r1.dlog_sprime[n - 1] = 0.0;
        }
        bool bad = false;
        for (std::size_t i = 0; i < n; ++i) {
            psi[i] = 0.5 * (psi[i] + wk.psi1[i] + dt * r1.dpsi[i]);
            phi[i] = 0.5 * (phi[i] + wk.phi1[i] + dt * r1.dphi[i]);
            sp[i] = 0.5 * (sp[i] + wk.sp1[i] * (1.0 + dt * r1.dlog_sprime[i]));
            if (!std::isfinite(psi[i]) || !std::isfinite(phi[i]) || !(sp[i] > 0.0) || psi[i] < 0.0 ||
                phi[i] < 0.0)
                bad = true;
        }
        if (bad) {
            // roll back to the last completed step for the censored record
            psi = w.psi;
            phi = w.phi;
            sp = w.sprime;
            halt(RunStatus::NumericalFailure, "nonfinite or negative field after step");
            return tr;
        }
        t += dt;
        ++step;
        tr.dt_last = dt;
        try {
            w = make_profile();
        } catch (const std::exception& ex) {
            halt(RunStatus::NumericalFailure, std::string("state failure: ") + ex.what());
            return tr;
        }

        // gradient bound, every step: sup of phi_s^2 and psi_s^2
        {
            const auto g = solver_detail::gradient_sup(w.s, psi, phi);
            tr.max_sup_v = std::max(tr.max_sup_v, g.sup_v);
            tr.max_sup_u = std::max(tr.max_sup_u, g.sup_u);
            if (!grad_flagged && (g.sup_v > 1.0 + ctl.grad_tol || g.sup_u > 1.0 + ctl.grad_tol)) {
                grad_flagged = true;
                TrajectoryEvent e;
                e.kind = EventKind::GradientViolation;
                e.t = t;
                e.step = step;
                e.value = std::max(g.sup_v, g.sup_u);
                e.detail = g.sup_v >= g.sup_u ? "sup phi_s^2 above 1" : "sup psi_s^2 above 1";
                tr.events.push_back(e);
                snapshot("gradient");
            }
        }

        const bool final_step = t >= ctl.t_end - t_eps;

        if (ctl.rm_ceiling > 0.0 || ctl.curvature_stride > 0) {
            if (step % std::max(ctl.curvature_stride, 1) == 0 || final_step) {
                const double rm = sup_riem(w);
                record_rm(rm);
                if (ctl.rm_ceiling > 0.0 && rm >= ctl.rm_ceiling) {
                    TrajectoryEvent e;
                    e.kind = EventKind::SingularityDetected;
                    e.t = t;
                    e.step = step;
                    e.value = rm;
                    e.detail = "curvature ceiling reached; state censored";
                    tr.events.push_back(e);
                    snapshot("ceiling");
                    halt(RunStatus::Singular, "sup|Rm| ceiling");
                    return tr;
                }
            }
        }

        if (suite && (step % std::max(ctl.monitor_stride, 1) == 0 || final_step)) {
            const double T_box = t + ctl.barrier_time_offset;
            const std::size_t brk = solver_detail::monotonicity_break(w, face_r);
            if (brk != static_cast<std::size_t>(-1)) {
                if (!mono_flagged) {
                    mono_flagged = true;
                    TrajectoryEvent e;
                    e.kind = EventKind::MonotonicityLoss;
                    e.t = t;
                    e.step = step;
                    e.r = w.phi[brk];
                    e.detail = "phi stopped increasing below the face radius";
                    tr.events.push_back(e);
                    snapshot("monotonicity");
                }
                if (ctl.halt_on_crossing) {
                    halt(RunStatus::Crossed, "phi monotonicity lost below the face");
                    return tr;
                }
            } else if (T_box <= 1.0 + 1e-12) {
                const auto view = solver_detail::radial_view(w);
                const auto trap = trapping_monitor(view, *suite, T_box);
                if (trap.status == TrapStatus::Crossed && !cross_flagged) {
                    cross_flagged = true;
                    TrajectoryEvent e;
                    e.kind = EventKind::BarrierCrossing;
                    e.t = t;
                    e.step = step;
                    e.r = trap.r;
                    e.value = trap.excess;
                    e.on_parabolic_boundary = trap.on_parabolic_boundary;
                    e.detail = trap.barrier;
                    tr.events.push_back(e);
                    snapshot("crossing");
                    if (ctl.halt_on_crossing) {
                        halt(RunStatus::Crossed, "barrier envelope crossed at " + trap.barrier);
                        return tr;
                    }
                }
            }
        }

        if (ctl.tip_scale != TipScaleKind::None &&
            (step % std::max(ctl.monitor_stride, 1) == 0)) {
            double ell = 0.0;
            if (ctl.tip_scale == TipScaleKind::ForwardBox) {
                const double T_box = t + ctl.barrier_time_offset;
                const double at = -ctl.ts_tau_star - std::log(T_box);
                if (at > 1.0) ell = std::sqrt(T_box / at) / ctl.ts_c0;
            } else {
                double pm = std::numeric_limits<double>::infinity();
                for (double f : phi) pm = std::min(pm, f);
                ell = pm / std::sqrt(alpha_sq(q));
            }
            const double ds_tip = w.s[1] - w.s[0];
            if (ell > 0.0 && ds_tip > 0.0) {
                const double nodes = ell / ds_tip;
                if (nodes < ctl.regrid_lo || nodes > ctl.regrid_hi) {
                    const double dx0 = ell / ctl.regrid_target;
                    const double len = w.s.back() - w.s.front();
                    const double dxm = ctl.grid_dx_max > 0.0 ? ctl.grid_dx_max : len / 16.0;
                    auto s_new = geometric_grid(len, dx0, ctl.grid_ratio, dxm);
                    for (auto& sv : s_new) sv += w.s.front();
                    const auto psi_h = HermiteSeries::pchip(w.s, psi);
                    const auto phi_h = HermiteSeries::pchip(w.s, phi);
                    std::vector<double> psi_n(s_new.size()), phi_n(s_new.size()),
                        sp_n(s_new.size(), 1.0);
                    for (std::size_t i = 0; i < s_new.size(); ++i) {
                        psi_n[i] = psi_h(s_new[i]);
                        phi_n[i] = phi_h(s_new[i]);
                    }
                    // exact endpoint carry-over: caps and frozen far field
                    psi_n.front() = psi.front();
                    phi_n.front() = phi.front();
                    psi_n.back() = psi.back();
                    phi_n.back() = phi.back();
                    RegridRecord rec{t, step, psi.size(), s_new.size(), dx0};
                    x = s_new;
                    psi = std::move(psi_n);
                    phi = std::move(phi_n);
                    sp = std::move(sp_n);
                    wk.psi1.resize(x.size());
                    wk.phi1.resize(x.size());
                    wk.sp1.resize(x.size());
                    tr.regrids.push_back(rec);
                    try {
                        w = make_profile();
                    } catch (const std::exception& ex) {
                        halt(RunStatus::NumericalFailure, std::string("regrid failure: ") + ex.what());
                        return tr;
                    }
                }
            }
        }

        if (next_snapshot < ctl.snapshot_times.size() && t >= ctl.snapshot_times[next_snapshot]) {
            snapshot("scheduled");
            while (next_snapshot < ctl.snapshot_times.size() && t >= ctl.snapshot_times[next_snapshot])
                ++next_snapshot;
        }
    }
}

// ---------------------------------------------------------------------------
// radial-mode integration (tip studies)

struct RadialSnapshot {
    double t = 0.0;
    RadialState st;
};

struct RadialTrajectory {
    RunStatus status = RunStatus::ReachedTEnd;
    std::string halt_detail;
    double t_final = 0.0;
    long long steps = 0;
    std::vector<RadialSnapshot> snapshots;
    bool dirichlet_from_barrier = false; // right-end values pinned to envelope midpoints
};

// SSP-RK2 on (v, h) at fixed r. The right end is Dirichlet: pinned to the
// barrier envelope midpoint at the current box time when a suite is given
// (recorded on the trajectory), frozen at its initial values otherwise.
inline RadialTrajectory integrate_radial(const RadialState& st0, const StepControls& ctl,
                                         const BarrierSuite* suite = nullptr) {
    st0.validate();
    if (!(ctl.t_end > ctl.t_start)) throw config_error("integrate_radial: need t_end > t_start");
    RadialTrajectory tr;
    tr.dirichlet_from_barrier = suite != nullptr;
    RadialState st = st0;
    const std::size_t n = st.size();
    double t = ctl.t_start;
    long long step = 0;
    tr.snapshots.push_back({t, st});

    auto pin_end = [&](RadialState& s, double tt) {
        if (suite) {
            const auto b = eval_suite(*suite, s.r[n - 1], tt + ctl.barrier_time_offset);
            s.v[n - 1] = 0.5 * (b.v_minus + b.v_plus);
            s.h[n - 1] = 0.5 * (b.h_minus + b.h_plus);
        } else {
            s.v[n - 1] = st0.v[n - 1];
            s.h[n - 1] = st0.h[n - 1];
        }
    };

    double dr_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < n; ++i) dr_min = std::min(dr_min, st.r[i] - st.r[i - 1]);

    while (t < ctl.t_end - 1e-307 && step < ctl.max_steps) {
        RhsResult r0;
        try {
            r0 = rhs_radial(st);
        } catch (const std::exception& ex) {
            tr.status = RunStatus::NumericalFailure;
            tr.halt_detail = ex.what();
            break;
        }
        double vmax = 1.0;
        for (double v : st.v) vmax = std::max(vmax, v);
        double dt = ctl.dt_fixed > 0.0
                        ? ctl.dt_fixed
                        : ctl.cfl * dr_min * dr_min / (2.0 * vmax * (1.0 + std::max(st.p, st.q)));
        if (ctl.dt_fixed <= 0.0) {
            for (std::size_t i = 0; i < n; ++i) {
                if (r0.dv[i] != 0.0) dt = std::min(dt, ctl.reaction_factor * st.v[i] / std::abs(r0.dv[i]));
                if (r0.dh[i] != 0.0) dt = std::min(dt, ctl.reaction_factor * st.h[i] / std::abs(r0.dh[i]));
            }
        }
        dt = std::min(dt, ctl.t_end - t);

        RadialState s1 = st;
        for (std::size_t i = 0; i < n; ++i) {
            s1.v[i] = st.v[i] + dt * r0.dv[i];
            s1.h[i] = st.h[i] + dt * r0.dh[i];
        }
        pin_end(s1, t + dt);
        RhsResult r1;
        try {
            r1 = rhs_radial(s1);
        } catch (const std::exception& ex) {
            tr.status = RunStatus::NumericalFailure;
            tr.halt_detail = ex.what();
            break;
        }
        bool bad = false;
        for (std::size_t i = 0; i < n; ++i) {
            st.v[i] = 0.5 * (st.v[i] + s1.v[i] + dt * r1.dv[i]);
            st.h[i] = 0.5 * (st.h[i] + s1.h[i] + dt * r1.dh[i]);
            if (!std::isfinite(st.v[i]) || !(st.h[i] > 0.0) || !(st.v[i] > 0.0)) bad = true;
        }
        pin_end(st, t + dt);
        if (bad) {
            st = tr.snapshots.back().st;
            tr.status = RunStatus::NumericalFailure;
            tr.halt_detail = "nonpositive or nonfinite field after step";
            break;
        }
        t += dt;
        ++step;
    }
    if (tr.status == RunStatus::ReachedTEnd && step >= ctl.max_steps) tr.status = RunStatus::StepLimit;
    tr.t_final = t;
    tr.steps = step;
    tr.snapshots.push_back({t, st});
    return tr;
}

// ---------------------------------------------------------------------------
// singular cone data and mollification

// Initial data emerging from the cone-over-product singular metric:
// psi = s, phi = k s / sqrt(L(s)) with L(s) = log_scale - log s, sampled on a
// geometric radius grid (finest near the tip) and carried in the arclength
// parameterization, which is exact here since psi_s = 1. `log_scale` shifts
// the logarithm for rescaled (box) units; 0 means s is in physical units.
// Throws if k is too large for the gradient bound at the outer radius.
inline WarpedProfile initial_from_asymptotics(int p, int q, double k, double r_max, double dr0,
                                              double ratio = 1.05, double dr_max = 0.0,
                                              double log_scale = 0.0) {
    if (!(k > 0.0)) throw config_error("initial_from_asymptotics: need k > 0");
    if (dr_max <= 0.0) dr_max = r_max / 24.0;
    const auto r = geometric_grid(r_max, dr0, ratio, dr_max);

    // invert phi(s) = k s / sqrt(log_scale - log s) per node
    auto phi_of = [&](double s) { return k * s / std::sqrt(log_scale - std::log(s)); };
    auto s_of_r = [&](double rr) {
        double s = rr / k; // underestimate: sqrt(L) > 1 whenever L > 1
        for (int it = 0; it < 60; ++it) {
            const double L = log_scale - std::log(s);
            if (!(L > 0.25)) throw config_error("initial_from_asymptotics: radius too close to the log scale");
            const double f = phi_of(s) - rr;
            const double fp = k * (1.0 + 0.5 / L) / std::sqrt(L);
            const double sn = s - f / fp;
            if (!(sn > 0.0)) throw numerical_error("initial_from_asymptotics: inversion left the domain");
            if (std::abs(sn - s) <= 1e-15 * sn) { s = sn; break; }
            s = sn;
        }
        return s;
    };

    const std::size_t n = r.size();
    std::vector<double> S(n, 0.0), phi(n, 0.0), sp(n, 1.0);
    for (std::size_t i = 1; i < n; ++i) {
        S[i] = s_of_r(r[i]);
        phi[i] = r[i];
    }
    {
        const double L_out = log_scale - std::log(S[n - 1]);
        const double v_out = sq(k * (1.0 + 0.5 / L_out)) / L_out;
        if (!(v_out < 0.99))
            throw config_error("initial_from_asymptotics: k too large, cone slope approaches 1");
    }
    auto w = WarpedProfile::from_x_gauge(p, q, S, sp, S, phi);
    return w;
}

struct MollifyParams {
    double omega = 1e-3;    // cap area fraction of the face disk: r_cap = sqrt(omega) * face
    double epsilon = 0.05;  // clock fraction of the curvature-ceiling scale
    double big_c3 = 1e8;    // curvature ceiling entering the mollification clock
};

inline double mollify_time(const MollifyParams& mp, double face_r) {
    return mp.epsilon * (mp.omega * face_r * face_r) / std::sqrt(mp.big_c3);
}

struct MollifyReport {
    double r_cap = 0.0;
    double t_omega = 0.0;
    std::size_t nodes_replaced = 0;
    TrapResult trap; // post hoc check at t_omega
};

// Replace the singular tip of the cone data below r_cap = sqrt(omega) * face
// with a smooth cap aimed at the barrier envelope midpoints at t_omega. Nodes
// with phi >= r_cap keep their field values bit for bit; the arclength origin
// shifts by the (real) difference between the cap depth and the cone depth.
// The cap blends midpoint targets into the cone over [r_cap/2, r_cap], so the
// result is a convex combination of quantities strictly inside the envelopes;
// the trapped status at t_omega is still re-checked and failure throws.
inline MollifyReport mollify_initial(WarpedProfile& w, const MollifyParams& mp,
                                     const BarrierSuite& suite) {
    w.validate();
    if (!(mp.omega > 0.0 && mp.omega <= 1.0)) throw config_error("mollify_initial: omega in (0, 1]");
    const double face = face_radius(suite.c);
    const double r_cap = std::sqrt(mp.omega) * face;
    const double t_om = mollify_time(mp, face);

    std::size_t J = static_cast<std::size_t>(-1);
    for (std::size_t i = 0; i < w.size(); ++i)
        if (w.phi[i] >= r_cap) { J = i; break; }
    if (J == static_cast<std::size_t>(-1) || J + 4 > w.size() || J < 8)
        throw config_error("mollify_initial: cap radius not interior to the grid");

    auto mid = [&](double r) {
        const auto b = eval_suite(suite, r, t_om);
        return std::pair<double, double>{0.5 * (b.v_minus + b.v_plus), 0.5 * (b.h_minus + b.h_plus)};
    };
    // cone values as functions of radius, from the exact arclength relation
    auto cone = [&](double r) {
        double s = r / suite.c.k;
        double L = 0.0;
        for (int it = 0; it < 60; ++it) {
            L = -0.5 * suite.c.tau_star - std::log(s);
            const double f = suite.c.k * s / std::sqrt(L) - r;
            const double fp = suite.c.k * (1.0 + 0.5 / L) / std::sqrt(L);
            const double sn = s - f / fp;
            if (std::abs(sn - s) <= 1e-15 * sn) { s = sn; break; }
            s = sn;
        }
        const double v = sq(suite.c.k * (1.0 + 0.5 / L)) / L;
        return std::pair<double, double>{v, s * s};
    };
    auto target = [&](double r) {
        if (r <= 0.0) return mid(0.0);
        const double u = (r_cap - r) / (0.5 * r_cap);
        const double m = r <= 0.5 * r_cap ? 1.0 : smoothstep2(std::clamp(u, 0.0, 1.0));
        if (m >= 1.0) return mid(r);
        const auto tm = mid(r);
        const auto tc = cone(r);
        return std::pair<double, double>{m * tm.first + (1.0 - m) * tc.first,
                                         m * tm.second + (1.0 - m) * tc.second};
    };

    // rebuild the cap nodes at their (kept) radii; the new axis distance is
    // the arclength integral of 1/sqrt(v) through the cap. Simpson with the
    // analytic target at interval midpoints: trapezoid error here is O(dr^2)
    // relative in the reconstructed slope, which the near-axis envelope
    // comparison amplifies by 1/zeta^2 past the corridor width.
    std::vector<double> s_new(w.size());
    std::vector<double> r_cap_grid(J + 1);
    for (std::size_t i = 0; i <= J; ++i) r_cap_grid[i] = w.phi[i];
    std::vector<double> inv_sqrt_v(J + 1);
    for (std::size_t i = 0; i <= J; ++i) {
        const auto tg = target(r_cap_grid[i]);
        inv_sqrt_v[i] = 1.0 / std::sqrt(tg.first);
        if (i < J) w.psi[i] = std::sqrt(tg.second);
        if (!(tg.second > 0.0) || !(tg.first > 0.0))
            throw certification_failure("mollify_initial: target left the positive cone");
    }
    std::vector<double> s_cap(J + 1, 0.0);
    for (std::size_t i = 0; i < J; ++i) {
        const double dr = r_cap_grid[i + 1] - r_cap_grid[i];
        const double fm = 1.0 / std::sqrt(target(0.5 * (r_cap_grid[i] + r_cap_grid[i + 1])).first);
        s_cap[i + 1] = s_cap[i] + dr * (inv_sqrt_v[i] + 4.0 * fm + inv_sqrt_v[i + 1]) / 6.0;
    }
    for (std::size_t i = 0; i <= J; ++i) s_new[i] = s_cap[i];
    const double shift = s_cap[J] - w.s[J];
    for (std::size_t i = J + 1; i < w.size(); ++i) s_new[i] = w.s[i] + shift;

    w.x = s_new;
    w.s = s_new;
    std::fill(w.sprime.begin(), w.sprime.end(), 1.0);
    w.validate();

    MollifyReport rep;
    rep.r_cap = r_cap;
    rep.t_omega = t_om;
    rep.nodes_replaced = J;
    rep.trap = trapping_monitor(solver_detail::radial_view(w), suite, t_om);
    if (rep.trap.status != TrapStatus::Trapped)
        throw certification_failure("mollify_initial: mollified data not trapped at t_omega (" +
                                    rep.trap.barrier + " at r = " + std::to_string(rep.trap.r) + ")");
    return rep;
}

// ---------------------------------------------------------------------------
// presets

struct Preset {
    std::string name;
    WarpedProfile profile;
    StepControls controls;
};

// Round S^{p+q+1}: psi = cos s, phi = sin s on [0, pi/2]; shrinks
// homothetically and goes extinct at 1/(2(p+q)).
inline Preset make_round_sphere(int p, int q, std::size_t n = 280) {
    std::vector<double> x(n), sp(n, 1.0), psi(n), phi(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = 0.5 * pi * static_cast<double>(i) / static_cast<double>(n - 1);
        psi[i] = std::cos(x[i]);
        phi[i] = std::sin(x[i]);
    }
    psi[n - 1] = 0.0;
    phi[0] = 0.0;
    Preset pr;
    pr.name = "round-sphere";
    pr.profile = WarpedProfile::from_x_gauge(p, q, x, sp, psi, phi);
    pr.controls.t_end = 1.0; // curvature ceiling halts first
    pr.controls.curvature_stride = 8;
    pr.controls.max_steps = 4'000'000;
    return pr;
}

// S^q(b) over a flat p+1 disk: psi = s, phi = b. The q-sphere collapses at
// exactly b^2/(2(q-1)) while psi = s persists.
inline Preset make_flat_cylinder(int p, int q, double b = 0.45, double length = 2.0,
                                 std::size_t n = 220) {
    if (q < 2) throw config_error("make_flat_cylinder: need q >= 2 for a collapsing factor");
    std::vector<double> x(n), sp(n, 1.0), psi(n), phi(n, b);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = length * static_cast<double>(i) / static_cast<double>(n - 1);
        psi[i] = x[i];
    }
    Preset pr;
    pr.name = "flat-cylinder";
    pr.profile = WarpedProfile::from_x_gauge(p, q, x, sp, psi, phi);
    pr.controls.t_end = b * b / (2.0 * (q - 1)) * 1.05;
    pr.controls.curvature_stride = 4;
    pr.controls.max_steps = 2'000'000;
    return pr;
}

// Pole pinch: psi = sin s closes both ends, phi = b (1 - A cos s) is smallest
// at the s = 0 pole, so the q-sphere pinches there first.
inline Preset make_neckpinch(int p, int q, double b = 0.45, double A = 0.8, std::size_t n = 320) {
    std::vector<double> x(n), sp(n, 1.0), psi(n), phi(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = pi * static_cast<double>(i) / static_cast<double>(n - 1);
        psi[i] = std::sin(x[i]);
        phi[i] = b * (1.0 - A * std::cos(x[i]));
    }
    psi[0] = 0.0;
    psi[n - 1] = 0.0;
    Preset pr;
    pr.name = "neckpinch";
    pr.profile = WarpedProfile::from_x_gauge(p, q, x, sp, psi, phi);
    pr.controls.t_end = 0.05;
    pr.controls.curvature_stride = 4;
    pr.controls.tip_scale = TipScaleKind::Pinch;
    pr.controls.grid_dx_max = pi / 64.0;
    pr.controls.max_steps = 4'000'000;
    return pr;
}

// Product of round spheres (no s dependence): exact ODE dynamics, with both
// squared radii linear in time.
inline Preset make_homogeneous(int p, int q, double a = 1.0, double b = 1.0, std::size_t n = 8) {
    if (p < 1 || q < 2) throw config_error("make_homogeneous: need p >= 1, q >= 2 for positive factors");
    std::vector<double> x(n), sp(n, 1.0), psi(n, a), phi(n, b);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    Preset pr;
    pr.name = "homogeneous";
    pr.profile = WarpedProfile::from_x_gauge(p, q, x, sp, psi, phi);
    pr.controls.dt_fixed = 1e-3;
    pr.controls.t_end = 0.2;
    pr.controls.curvature_stride = 16;
    pr.controls.max_steps = 100'000;
    return pr;
}

// Forward run in box units (r, t rescaled by the barrier corner): mollified
// cone data evolved across the validity box with trapping monitored. The
// curvature ceiling is disabled: box units start above any fixed physical
// ceiling and decay, which meta records via rm_ceiling = 0.
inline Preset make_forward_box(const BarrierSuite& suite, const MollifyParams& mp,
                               MollifyReport* out_rep = nullptr) {
    const auto& c = suite.c;
    const double face = face_radius(c);
    const double t_om = mollify_time(mp, face);
    const double at0 = -c.tau_star - std::log(t_om);
    const double c0 = c.c0;
    const double ell0 = std::sqrt(t_om / at0) / c0;
    const double r_max = 1.3 * face;
    const double dr0 = ell0 / 11.0;

    Preset pr;
    pr.name = "forward";
    pr.profile = initial_from_asymptotics(c.p, c.q, c.k, r_max, dr0, 1.05, 3.0, -0.5 * c.tau_star);
    auto rep = mollify_initial(pr.profile, mp, suite);
    if (out_rep) *out_rep = rep;

    auto& ctl = pr.controls;
    ctl.t_start = 0.0;
    ctl.t_end = 1.0 - t_om;
    ctl.barrier_time_offset = t_om;
    ctl.freeze_right = true;
    ctl.halt_on_crossing = true;
    ctl.rm_ceiling = 0.0;
    ctl.monitor_stride = 32;
    ctl.curvature_stride = 0;
    ctl.tip_scale = TipScaleKind::ForwardBox;
    ctl.ts_tau_star = c.tau_star;
    ctl.ts_c0 = c0;
    const double L_face = -0.5 * c.tau_star - std::log(face);
    ctl.grid_dx_max = 3.0 / (c.k / std::sqrt(L_face));
    ctl.max_steps = 30'000'000;
    const int n_snap = 25;
    for (int i = 1; i <= n_snap; ++i) {
        const double T = t_om * std::pow(1.0 / t_om, static_cast<double>(i) / n_snap);
        ctl.snapshot_times.push_back(T - t_om);
    }
    return pr;
}

// ---------------------------------------------------------------------------
// post-run reports

struct CrossingReport {
    double t_dagger = 0.0;
    bool censored = false;
    std::string kind;          // "barrier" or "monotonicity"
    std::string barrier;       // offending envelope for barrier crossings
    double r = 0.0;
    bool on_parabolic_boundary = false;
    int interior_crossings = 0;
    bool avoidance_ok = false;
};

// First exit time of a monitored run: the earliest barrier crossing or
// phi-monotonicity loss below the face radius. A run that stays trapped to
// t_end is censored there, which still bounds the exit time from below.
inline CrossingReport crossing_time(const FlowTrajectory& tr) {
    CrossingReport rep;
    const TrajectoryEvent* first = nullptr;
    for (const auto& e : tr.events) {
        if (e.kind == EventKind::BarrierCrossing && !e.on_parabolic_boundary) ++rep.interior_crossings;
        if (e.kind != EventKind::BarrierCrossing && e.kind != EventKind::MonotonicityLoss) continue;
        if (!first || e.t < first->t) first = &e;
    }
    if (!first) {
        rep.censored = true;
        rep.t_dagger = tr.t_final;
        rep.avoidance_ok = rep.interior_crossings == 0;
        return rep;
    }
    rep.t_dagger = first->t;
    rep.kind = first->kind == EventKind::BarrierCrossing ? "barrier" : "monotonicity";
    rep.barrier = first->kind == EventKind::BarrierCrossing ? first->detail : "";
    rep.r = first->r;
    rep.on_parabolic_boundary = first->on_parabolic_boundary;
    rep.avoidance_ok = rep.interior_crossings == 0 &&
                       (first->kind != EventKind::BarrierCrossing || first->on_parabolic_boundary);
    return rep;
}

inline json to_json(const CrossingReport& r) {
    json j;
    j["t_dagger"] = r.t_dagger;
    j["censored"] = r.censored;
    if (!r.censored) {
        j["kind"] = r.kind;
        if (!r.barrier.empty()) j["barrier"] = r.barrier;
        j["r"] = r.r;
        j["on_parabolic_boundary"] = r.on_parabolic_boundary;
    }
    j["interior_crossings"] = r.interior_crossings;
    j["avoidance_ok"] = r.avoidance_ok;
    return j;
}

struct SingularityReport {
    bool detected = false;
    double T_hat = 0.0;
    double type_one_drift = 0.0; // relative spread of sup|Rm| (T_hat - t) on the window
    std::size_t window = 0;
};

// Extrapolate the singular time from the reciprocal curvature trend. The fit
// window is the last decade of sup|Rm| growth; no detection without a clear
// rising trend across that window.
inline SingularityReport detect_singularity(const FlowTrajectory& tr) {
    SingularityReport rep;
    const auto& s = tr.sup_rm;
    if (s.size() < 8) return rep;
    const double rm_last = s.back().second;
    double rm_first = rm_last;
    for (const auto& [t, rm] : s) rm_first = std::min(rm_first, rm);
    if (!(rm_last > 20.0 * rm_first)) return rep; // no trend to extrapolate

    std::vector<double> ts, ys;
    for (const auto& [t, rm] : s)
        if (rm >= 0.1 * rm_last) {
            ts.push_back(t);
            ys.push_back(1.0 / rm);
        }
    if (ts.size() < 4) return rep;
    double st = 0, sy = 0, stt = 0, sty = 0;
    const auto m = static_cast<double>(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        st += ts[i];
        sy += ys[i];
        stt += ts[i] * ts[i];
        sty += ts[i] * ys[i];
    }
    const double slope = (m * sty - st * sy) / (m * stt - st * st);
    const double icept = (sy - slope * st) / m;
    if (!(slope < 0.0)) return rep;
    rep.detected = true;
    rep.T_hat = -icept / slope;
    rep.window = ts.size();
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double ratio = (rep.T_hat - ts[i]) / ys[i]; // sup|Rm| (T_hat - t)
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    rep.type_one_drift = (hi - lo) / (0.5 * (hi + lo));
    return rep;
}

struct RegimeReport {
    bool partial = false;
    std::string partial_reason;
    double t_earliest = 0.0, t_latest = 0.0;
    double tip_sup_rel = 0.0;      // v against B(c0 zeta) on zeta <= 2, earliest snapshot
    double para_rho3_rel = 0.0;    // |tau| v against 2k^2(1 + aq2/rho^2) at rho = 3, earliest
    double para_h_rho3_rel = 0.0;  // h/t against (|tau|/2k^2)(rho^2 + aq2) at rho = 3, earliest
    std::vector<std::pair<double, double>> para_residual; // (t, sup residual on rho in [2.5, 4])
    bool para_residual_decreasing = false; // toward smaller t
    double outer_dev_rho10 = 0.0, outer_dev_rho30 = 0.0;
    bool outer_decays = false;
};

inline json to_json(const RegimeReport& r) {
    json j;
    j["partial"] = r.partial;
    if (r.partial) j["partial_reason"] = r.partial_reason;
    j["t_earliest"] = r.t_earliest;
    j["t_latest"] = r.t_latest;
    j["tip_sup_rel"] = r.tip_sup_rel;
    j["para_rho3_rel"] = r.para_rho3_rel;
    j["para_h_rho3_rel"] = r.para_h_rho3_rel;
    j["para_residual"] = json::array();
    for (const auto& [t, res] : r.para_residual) j["para_residual"].push_back({t, res});
    j["para_residual_decreasing"] = r.para_residual_decreasing;
    j["outer_dev_rho10"] = r.outer_dev_rho10;
    j["outer_dev_rho30"] = r.outer_dev_rho30;
    j["outer_decays"] = r.outer_decays;
    return j;
}

// Compare a forward trajectory against the profile hierarchy: the tip against
// B(c0 zeta), the parabolic window against the k-profile in scaled variables,
// and the outer region against its own initial values at fixed radius.
// `log_time_offset` shifts log t for rescaled runs (pass tau_star for box
// units); |tau| = -(log_time_offset + log t).
inline RegimeReport regime_report(const FlowTrajectory& tr, double k, const SolitonHierarchy& tab,
                                  double log_time_offset = 0.0) {
    RegimeReport rep;
    if (tr.snapshots.size() < 4) {
        rep.partial = true;
        rep.partial_reason = "fewer than 4 snapshots";
        return rep;
    }
    const int q = tr.snapshots.front().w.q;
    const double aq2 = alpha_sq(q);
    const double c0 = 1.0 / (k * std::sqrt(2.0 * aq2));
    const double k2 = k * k;

    std::vector<std::pair<double, RadialState>> views;
    for (const auto& snap : tr.snapshots) {
        if (!(snap.t > 0.0) || snap.step == 0) continue; // fits only on evolved states
        if (!views.empty() && views.back().first == snap.t) continue;
        const std::size_t brk = solver_detail::monotonicity_break(
            snap.w, std::numeric_limits<double>::infinity());
        if (brk != static_cast<std::size_t>(-1)) continue;
        views.emplace_back(snap.t, solver_detail::radial_view(snap.w));
    }
    if (views.size() < 4) {
        rep.partial = true;
        rep.partial_reason = "fewer than 4 usable positive-time snapshots";
        return rep;
    }
    rep.t_earliest = views.front().first;
    rep.t_latest = views.back().first;

    auto at_of = [&](double t) { return -(log_time_offset + std::log(t)); };

    // tip fit on the earliest snapshot
    {
        const auto& [t, st] = views.front();
        const double at = at_of(t);
        const double rt = std::sqrt(t);
        double sup = 0.0;
        std::size_t used = 0;
        for (std::size_t i = 0; i < st.size(); ++i) {
            const double zeta = std::sqrt(at) * st.r[i] / rt;
            if (zeta > 2.0) break;
            const double b = tab.B.value(c0 * zeta);
            sup = std::max(sup, std::abs(st.v[i] / b - 1.0));
            ++used;
        }
        if (used < 6) {
            rep.partial = true;
            rep.partial_reason = "tip window under-resolved";
        }
        rep.tip_sup_rel = sup;
    }

    // parabolic residual per snapshot, plus the rho = 3 checks at earliest time
    auto para_resid = [&](const std::pair<double, RadialState>& tv, double* rho3_v, double* rho3_h) {
        const auto& [t, st] = tv;
        const double at = at_of(t);
        const double rt = std::sqrt(t);
        double sup = -1.0;
        std::vector<double> rhos, vts, hts;
        for (std::size_t i = 0; i < st.size(); ++i) {
            const double rho = st.r[i] / rt;
            if (rho < 2.0 || rho > 4.5) continue;
            rhos.push_back(rho);
            vts.push_back(at * st.v[i]);
            hts.push_back(st.h[i] / t);
            if (rho >= 2.5 && rho <= 4.0) {
                const double model = 2.0 * k2 * (1.0 + aq2 / (rho * rho));
                sup = std::max(sup, std::abs(at * st.v[i] / model - 1.0));
            }
        }
        if (rho3_v && rhos.size() >= 2 && rhos.front() <= 3.0 && rhos.back() >= 3.0) {
            const double vt3 = interp_linear(rhos, vts, 3.0);
            const double ht3 = interp_linear(rhos, hts, 3.0);
            *rho3_v = std::abs(vt3 / (2.0 * k2 * (1.0 + aq2 / 9.0)) - 1.0);
            *rho3_h = std::abs(ht3 / (at / (2.0 * k2) * (9.0 + aq2)) - 1.0);
        }
        return sup;
    };
    double r3v = -1.0, r3h = -1.0;
    for (const auto& tv : views) {
        double* pv = &r3v;
        double* ph = &r3h;
        if (tv.first != views.front().first) pv = ph = nullptr;
        const double res = para_resid(tv, pv, ph);
        if (res >= 0.0) rep.para_residual.emplace_back(tv.first, res);
    }
    if (r3v < 0.0 || rep.para_residual.size() < 3) {
        rep.partial = true;
        rep.partial_reason = "parabolic window under-resolved";
    } else {
        rep.para_rho3_rel = r3v;
        rep.para_h_rho3_rel = r3h;
        // one representative residual per decade, then require monotone growth
        // away from the singular time (equivalently decay toward smaller t)
        std::vector<double> by_decade;
        double decade = std::floor(std::log10(rep.para_residual.front().first));
        double current = rep.para_residual.front().second;
        for (const auto& [t, res] : rep.para_residual) {
            const double d = std::floor(std::log10(t));
            if (d > decade) {
                by_decade.push_back(current);
                decade = d;
            }
            current = res;
        }
        by_decade.push_back(current);
        rep.para_residual_decreasing = by_decade.size() >= 3;
        for (std::size_t i = 1; i < by_decade.size(); ++i)
            if (by_decade[i] <= by_decade[i - 1]) rep.para_residual_decreasing = false;
    }

    // outer deviation at fixed radius between the first and last snapshot
    {
        const auto& [t0, st0] = views.front();
        const auto& [t1, st1] = views.back();
        const double rt1 = std::sqrt(t1);
        auto dev_at = [&](double rho) {
            const double r = rho * rt1;
            if (r > st0.r.back() || r > st1.r.back() || r < st0.r.front() || r < st1.r.front())
                return -1.0;
            const double v0 = interp_linear(st0.r, st0.v, r);
            const double v1 = interp_linear(st1.r, st1.v, r);
            return std::abs(v1 / v0 - 1.0);
        };
        rep.outer_dev_rho10 = dev_at(10.0);
        rep.outer_dev_rho30 = dev_at(30.0);
        if (rep.outer_dev_rho10 < 0.0 || rep.outer_dev_rho30 < 0.0) {
            rep.partial = true;
            rep.partial_reason = "outer radii outside the grid";
        } else {
            rep.outer_decays = rep.outer_dev_rho30 < rep.outer_dev_rho10;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// cross-gauge consistency oracle

struct TransportCheck {
    double rel_err_v = 0.0;
    double rel_err_h = 0.0;
};

// Transport the fixed-x right-hand side to the radial gauge and compare with
// the radial right-hand side on the same profile. At fixed r the chain rule
// gives dv = 2 phi_s ((dphi)_s - phi_s dlog s') - v_r dphi and dh = 2 psi dpsi
// - h_r dphi. Agreement here pins the sphere-curvature constant and the
// coupling normalization in the radial operators; the mismatch must shrink at
// second order under grid refinement. End stencils are excluded (one-sided
// differences of transported and native quantities differ at the boundary).
inline TransportCheck gauge_transport_check(const WarpedProfile& w) {
    const auto fx = rhs_fixed_x(w);
    const auto d = detail::s_derivatives(w);
    const auto st = to_radial(w);
    const auto fr = rhs_radial(st);
    const auto dphi_s = differentiate(w.s, fx.dphi, 1);
    const std::size_t n = w.size();
    std::vector<double> v(n), h(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = sq(d.phi_s[i]);
        h[i] = sq(w.psi[i]);
    }
    const auto v_r = differentiate(st.r, v, 1);
    const auto h_r = differentiate(st.r, h, 1);
    double scale_v = 0.0, scale_h = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        scale_v = std::max(scale_v, std::abs(fr.dv[i]));
        scale_h = std::max(scale_h, std::abs(fr.dh[i]));
    }
    TransportCheck chk;
    for (std::size_t i = 3; i + 3 < n; ++i) {
        const double dv_x = 2.0 * d.phi_s[i] * (dphi_s[i] - d.phi_s[i] * fx.dlog_sprime[i]);
        const double dv_r = dv_x - v_r[i] * fx.dphi[i];
        const double dh_r = 2.0 * w.psi[i] * fx.dpsi[i] - h_r[i] * fx.dphi[i];
        chk.rel_err_v = std::max(chk.rel_err_v, std::abs(dv_r - fr.dv[i]) / scale_v);
        chk.rel_err_h = std::max(chk.rel_err_h, std::abs(dh_r - fr.dh[i]) / scale_h);
    }
    return chk;
}

// ---------------------------------------------------------------------------
// omega sweep

struct ForwardRunResult {
    double omega = 0.0;
    double t_omega = 0.0;
    MollifyReport moll;
    FlowTrajectory traj;
    CrossingReport crossing;
    StepControls controls;
};

inline ForwardRunResult run_forward_box(const BarrierSuite& suite, double omega,
                                        const std::function<void(StepControls&)>& tweak = {}) {
    ForwardRunResult res;
    res.omega = omega;
    MollifyParams mp;
    mp.omega = omega;
    res.t_omega = mollify_time(mp, face_radius(suite.c));
    auto preset = make_forward_box(suite, mp, &res.moll);
    if (tweak) tweak(preset.controls);
    res.controls = preset.controls;
    res.traj = integrate(preset.profile, preset.controls, &suite);
    res.crossing = crossing_time(res.traj);
    return res;
}

inline int sweep_thread_count() {
    if (const char* env = std::getenv("WARPFLOW_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

// Independent mollified forward runs across a list of cap fractions. Runs
// share nothing mutable, so they execute concurrently up to the thread count
// (WARPFLOW_THREADS overrides the hardware default). Results keep the input
// order regardless of completion order.
inline std::vector<ForwardRunResult> run_omega_sweep(
    const BarrierSuite& suite, const std::vector<double>& omegas,
    const std::function<void(StepControls&)>& tweak = {}, int threads = 0) {
    if (threads <= 0) threads = sweep_thread_count();
    std::vector<ForwardRunResult> out(omegas.size());
    std::size_t next = 0;
    while (next < omegas.size()) {
        const std::size_t batch = std::min<std::size_t>(threads, omegas.size() - next);
        std::vector<std::future<ForwardRunResult>> fs;
        fs.reserve(batch);
        for (std::size_t i = 0; i < batch; ++i)
            fs.push_back(std::async(std::launch::async, [&, idx = next + i] {
                return run_forward_box(suite, omegas[idx], tweak);
            }));
        for (std::size_t i = 0; i < batch; ++i) out[next + i] = fs[i].get();
        next += batch;
    }
    return out;
}

// ---------------------------------------------------------------------------
// matched forward window (physical units, moderate |log t|)

// Initial data assembled from the three-regime asymptotics at time t0: the
// tip profile B(c0 zeta) with its first correction, matched through the
// parabolic k-profile into the quasi-static cone. Returns the x-gauge profile
// on a geometric radius grid reaching rho_max at sqrt(t1).
inline WarpedProfile matched_forward_data(int p, int q, double k, double t0, double r_max,
                                          const SolitonHierarchy& tab, double dr0, double dr_max) {
    const double at = -std::log(t0);
    const double aq2 = alpha_sq(q);
    const double c0 = 1.0 / (k * std::sqrt(2.0 * aq2));
    const double k2 = k * k;
    const auto r = geometric_grid(r_max, dr0, 1.05, dr_max);
    const std::size_t n = r.size();
    std::vector<double> v(n), h(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double rho = r[i] / std::sqrt(t0);
        const double zeta = rho * std::sqrt(at);
        const double L = 0.5 * at - std::log(std::max(rho, 1e-300));
        // tip form carries the full first correction; its large-zeta limit is
        // the parabolic profile, which the cone form continues in L
        const double v_tip = tab.B.value(c0 * zeta) + tab.C.value(c0 * zeta) / (at * c0 * c0);
        const double v_cone = (k2 / L) * (1.0 + aq2 / (rho * rho));
        const double h_tip = t0 * at * (aq2 * aq2 * c0 * c0 + tab.A.value(c0 * zeta) / at);
        const double h_cone = r[i] * r[i] * L / k2;
        if (zeta <= 6.0) {
            v[i] = v_tip;
            h[i] = h_tip;
        } else if (zeta < 12.0) {
            const double m = smoothstep2((12.0 - zeta) / 6.0);
            v[i] = m * v_tip + (1.0 - m) * v_cone;
            h[i] = m * h_tip + (1.0 - m) * h_cone;
        } else {
            v[i] = v_cone;
            h[i] = h_cone;
        }
    }
    v[0] = 1.0; // axis: B(0) = 1 with the correction vanishing quadratically
    RadialState st;
    st.p = p;
    st.q = q;
    st.r = r;
    st.v = std::move(v);
    st.h = std::move(h);
    auto w = from_radial(st);
    w.x = w.s;
    w.sprime.assign(w.size(), 1.0);
    return w;
}

// Forward window run for the asymptotics report: physical units, three time
// decades, frozen quasi-static cone at the outer radius.
inline Preset make_forward_window(int p, int q, double k, const SolitonHierarchy& tab,
                                  double t0 = 1e-12, double t1 = 1e-9, double rho_max = 45.0) {
    const double at0 = -std::log(t0);
    const double aq2 = alpha_sq(q);
    const double c0 = 1.0 / (k * std::sqrt(2.0 * aq2));
    const double ell0 = std::sqrt(t0 / at0) / c0;
    const double r_max = rho_max * std::sqrt(t1);
    Preset pr;
    pr.name = "forward-window";
    pr.profile = matched_forward_data(p, q, k, t0, r_max, tab, ell0 / 11.0, r_max / 48.0);
    auto& ctl = pr.controls;
    ctl.t_start = t0;
    ctl.t_end = t1;
    ctl.freeze_right = true;
    ctl.rm_ceiling = 0.0;
    ctl.curvature_stride = 64;
    ctl.tip_scale = TipScaleKind::ForwardBox;
    ctl.ts_tau_star = 0.0; // physical units: at = -log t
    ctl.ts_c0 = c0;
    ctl.grid_dx_max = r_max / 48.0;
    ctl.max_steps = 2'000'000;
    const int n_snap = 30;
    for (int i = 1; i <= n_snap; ++i)
        ctl.snapshot_times.push_back(t0 * std::pow(t1 / t0, static_cast<double>(i) / n_snap));
    return pr;
}

} // namespace warpflow
