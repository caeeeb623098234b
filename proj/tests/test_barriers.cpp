#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "warpflow/barriers.hpp"
#include "warpflow/solitons.hpp"

using namespace warpflow;
using Catch::Approx;

namespace {

std::shared_ptr<const SolitonHierarchy> tables() {
    static auto t = std::make_shared<const SolitonHierarchy>(build_soliton_hierarchy(2));
    return t;
}

const BarrierSuite& certified() {
    static BarrierSuite s = build_suite(1.0, 1, 2, 0.05, 0.05, tables());
    return s;
}

// synthetic constants for the finite-difference oracles: the defect identities
// are pointwise algebra, so any positive values exercise them; these match the
// frozen python oracle run
BarrierConstants synthetic() {
    BarrierConstants c;
    c.k = 1.0;
    c.p = 1;
    c.q = 2;
    c.epsilon = 0.05;
    c.delta = 0.05;
    c.a_plus_sq = 1.05;
    c.a_minus_sq = 0.95;
    c.b_plus_sq = 1.05;
    c.b_minus_sq = 0.95;
    c.d_plus = 1.05;
    c.d_minus = 0.95;
    c.ahat_plus_sq = 1.02;
    c.ahat_minus_sq = 1.02;
    c.bhat_plus_sq = 0.97;
    c.bhat_minus_sq = 0.97;
    c.D = 25.0;
    c.c_plus = 0.48;
    c.c_minus = 0.55;
    c.cbar_plus = 0.58;
    c.cbar_minus = 0.40;
    c.c0 = 0.5;
    c.rho1 = 1.14;
    c.rho2 = 2.28;
    c.zeta1 = 12.0;
    c.zeta2 = 24.0;
    c.tau_star = -40.0;
    c.log_r_star = -15.0;
    return c;
}

struct Fd {
    double f = 0.0, fr = 0.0, frr = 0.0, ft = 0.0;
};

template <class F>
Fd fd_derivs(F&& f, double r, double t, double dr_rel = 1e-5) {
    Fd d;
    const double dr = r * dr_rel, dt = t * 1e-5;
    d.f = f(r, t);
    d.fr = (f(r + dr, t) - f(r - dr, t)) / (2.0 * dr);
    d.frr = (f(r + dr, t) - 2.0 * d.f + f(r - dr, t)) / (dr * dr);
    d.ft = (f(r, t + dt) - f(r, t - dt)) / (2.0 * dt);
    return d;
}

// physical v-flow operator with frozen coupling pair (u*, h*)
double gv_op(const BarrierConstants& c, const Fd& d, double r, double u_star, double h_star) {
    return d.f * d.frr - 0.5 * d.fr * d.fr + (c.q - 1 - d.f) * d.fr / r +
           c.aq2() * d.f * (1.0 - d.f) / (r * r) - 2.0 * c.p * u_star * d.f / h_star;
}

// physical h-flow operator with frozen pair (u*, v*)
double gh_op(const BarrierConstants& c, const Fd& d, double r, double u_star, double v_star) {
    return v_star * d.frr + (c.q - 1 + v_star) * d.fr / r - 4.0 * u_star - c.ap2();
}

} // namespace

TEST_CASE("parabolic defects match direct (r,t) finite differences") {
    const auto c = synthetic();
    for (int sign : {+1, -1}) {
        auto v_phys = [&](double r, double t) {
            const double at = -std::log(t);
            return para_vt_value(c, sign, r / std::sqrt(t), at) / at;
        };
        auto h_phys = [&](double r, double t) {
            const double at = -std::log(t);
            return t * at * para_eta_value(c, sign, r / std::sqrt(t), at);
        };
        for (double rho : {2.0, 5.0, 20.0, 36.0}) {
            for (double t : {1e-3, 1e-5}) {
                CAPTURE(sign, rho, t);
                const double at = -std::log(t);
                const double r = rho * std::sqrt(t);
                const double u_star = 0.37;
                const double eta_star = para_eta_value(c, sign, rho, at);
                const double vt_star = para_vt_value(c, sign, rho, at);

                const auto dv = fd_derivs(v_phys, r, t);
                const double fd_v = (dv.ft - gv_op(c, dv, r, u_star, t * at * eta_star)) * t * at;
                const double closed_v = para_defect_v(c, sign, rho, at, u_star, eta_star);
                CHECK(closed_v == Approx(fd_v).margin(1e-5 * (1.0 + std::abs(closed_v))));

                const auto dh = fd_derivs(h_phys, r, t);
                const double fd_h = (dh.ft - gh_op(c, dh, r, u_star, vt_star / at)) / at;
                const double closed_h = para_defect_h(c, sign, rho, at, u_star, vt_star);
                CHECK(closed_h == Approx(fd_h).margin(1e-5 * (1.0 + std::abs(closed_h))));
            }
        }
    }

    // frozen pins from the independent python FD oracle (u* = 0, own-family h*)
    const double at3 = -std::log(1e-3), at5 = -std::log(1e-5);
    CHECK(para_defect_v(c, +1, 2.0, at3, 0.0, para_eta_value(c, +1, 2.0, at3)) ==
          Approx(0.3964213).epsilon(1e-4));
    CHECK(para_defect_v(c, -1, 2.0, at5, 0.0, para_eta_value(c, -1, 2.0, at5)) ==
          Approx(-0.01268839).epsilon(1e-3));
}

TEST_CASE("outer defects match direct (r,t) finite differences") {
    const auto c = synthetic();
    const double r = std::exp(-40.0);
    for (int sign : {+1, -1}) {
        auto v_phys = [&](double rr, double tt) {
            return outer_v_value(c, sign, BoxPoint::from_rt(rr, tt));
        };
        auto h_phys = [&](double rr, double tt) {
            return rr * rr * outer_hbar(c, sign, BoxPoint::from_rt(rr, tt));
        };
        for (double rho : {1.5, 3.0, 30.0}) {
            CAPTURE(sign, rho);
            const double t = r * r / (rho * rho);
            const BoxPoint pt = BoxPoint::from_rt(r, t);
            const double u_star = 0.6;
            const double hbar_star = outer_hbar(c, sign, pt);
            const double v_star = outer_v_value(c, sign, pt);

            const auto dv = fd_derivs(v_phys, r, t);
            const double fd_v = (dv.ft - gv_op(c, dv, r, u_star, r * r * hbar_star)) * r * r;
            const double closed_v = outer_defect_v(c, sign, pt, u_star, hbar_star);
            CHECK(closed_v == Approx(fd_v).margin(1e-4 * (1.0 + std::abs(closed_v))));

            const auto dh = fd_derivs(h_phys, r, t);
            const double fd_h = dh.ft - gh_op(c, dh, r, u_star, v_star);
            const double closed_h = outer_defect_h(c, sign, pt, u_star, v_star);
            CHECK(closed_h == Approx(fd_h).margin(1e-3 * (1.0 + std::abs(closed_h))));
        }
    }
}

TEST_CASE("tip defects match direct (r,t) finite differences") {
    const auto c = synthetic();
    const auto tab = tables();
    const double t0 = std::exp(-20.0);
    for (int sign : {+1, -1}) {
        auto zeta_of = [&](double rr, double tt) { return rr * std::sqrt(-std::log(tt) / tt); };
        auto v_phys = [&](double rr, double tt) {
            return tip_v_value(c, *tab, sign, zeta_of(rr, tt), -std::log(tt));
        };
        auto h_phys = [&](double rr, double tt) {
            const double at = -std::log(tt);
            return tt * at * tip_H_value(c, *tab, sign, zeta_of(rr, tt), at);
        };
        for (double zeta : {0.5, 3.0, 8.0, 20.0}) {
            CAPTURE(sign, zeta);
            const double at = -std::log(t0);
            const double r = zeta * std::sqrt(t0 / at);
            const double u_star = 0.25;
            const double H_star = tip_H_value(c, *tab, sign, zeta, at);
            const double v_star = tip_v_value(c, *tab, sign, zeta, at);

            // wider r-step: both profiles vary only through zeta, so an
            // r-relative 1e-5 stencil cancels to roundoff on the r^2-scaled h
            const auto dv = fd_derivs(v_phys, r, t0, 1e-3);
            const double fd_v = (dv.ft - gv_op(c, dv, r, u_star, t0 * at * H_star)) * t0 / at;
            const double closed_v = tip_defect_v(c, *tab, sign, zeta, at, u_star, H_star);
            CHECK(closed_v == Approx(fd_v).margin(2e-5 * (1.0 + std::abs(closed_v))));

            const auto dh = fd_derivs(h_phys, r, t0, 1e-3);
            const double fd_h = (dh.ft - gh_op(c, dh, r, u_star, v_star)) / at;
            const double closed_h = tip_defect_h(c, *tab, sign, zeta, at, u_star, v_star);
            CHECK(closed_h == Approx(fd_h).margin(2e-5 * (1.0 + std::abs(closed_h))));
        }
    }
}

TEST_CASE("tip axis defect reduces to the coupling term") {
    const auto c = synthetic();
    const auto tab = tables();
    const double at = 40.0;
    for (int sign : {+1, -1}) {
        const double V0 = tip_v_value(c, *tab, sign, 0.0, at);
        CHECK(V0 == Approx(1.0).margin(1e-12)); // B(0) = 1, C(0) = 0
        const double u_star = 0.8, H_star = 0.9;
        const double expect = 2.0 * c.p * u_star * V0 / (at * at * H_star);
        CHECK(tip_defect_v(c, *tab, sign, 0.0, at, u_star, H_star) == Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("defects are monotone in the coupling pair") {
    // the only h* dependence is -2pu v/h* inside G, so the raw defect
    // decreases in h* for either sign: the upper margin +D is worst at the
    // bracket top, the lower margin -D at the bracket bottom, and the
    // sweeps' bracket extremes cover the pair range
    const auto c = synthetic();
    const double at = 40.0, rho = 2.0, u_star = 1.0;
    double prev_up = std::numeric_limits<double>::infinity();
    double prev_lo = std::numeric_limits<double>::infinity();
    for (double eta : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        const double d_up = para_defect_v(c, +1, rho, at, u_star, eta);
        const double d_lo = para_defect_v(c, -1, rho, at, u_star, eta);
        CHECK(d_up < prev_up);
        CHECK(d_lo < prev_lo);
        prev_up = d_up;
        prev_lo = d_lo;
    }
}

TEST_CASE("suite construction finds certified constants") {
    const auto& s = certified();
    const auto& c = s.c;

    CHECK(c.rho2 == Approx(2.0 * c.rho1));
    CHECK(c.zeta2 == Approx(2.0 * c.zeta1));
    CHECK(c.c0 == Approx(1.0 / std::sqrt(2.0 * c.aq2())));

    // tip scale ordering: compressed upper profile, stretched lower
    CHECK(c.c_plus < c.c0);
    CHECK(c.c_minus > c.c0);
    CHECK(c.c_plus > 0.5 * c.c0);
    CHECK(c.c_minus < 1.5 * c.c0);
    CHECK(c.cbar_plus > c.c0);
    CHECK(c.cbar_minus < c.c0);
    CHECK(c.cbar_plus < 1.5 * c.c0);
    CHECK(c.cbar_minus > 0.5 * c.c0);

    // parabolic amplitudes stay within the slack the outer match allows
    CHECK(std::abs(c.ahat_plus_sq - c.k * c.k) <= 2.0 * (c.epsilon + c.delta) * c.k * c.k);
    CHECK(std::abs(c.ahat_minus_sq - c.k * c.k) <= 2.0 * (c.epsilon + c.delta) * c.k * c.k);
    CHECK(c.D > 0.0);

    // round trip through json
    const json j = to_json(c);
    const auto c2 = barrier_constants_from_json(j);
    CHECK(to_json(c2) == j);
}

TEST_CASE("envelope ordering and continuity across the box") {
    const auto& s = certified();
    const double R_face = std::exp(s.c.log_r_star - s.c.tau_star / 2.0);

    std::size_t n_checked = 0;
    for (double T : {1.0, 0.3, 0.05, 1e-3, 1e-6}) {
        // R = 0 axis point: both v caps close at exactly 1
        const auto b0 = eval_suite(s, 0.0, T);
        CHECK(b0.v_minus <= b0.v_plus);
        CHECK(b0.h_minus < b0.h_plus);
        CHECK(b0.h_minus > 0.0);
        const auto Rs = barrier_detail::log_spaced(1e-8 * R_face, R_face, 2200);
        for (double R : Rs) {
            const auto b = eval_suite(s, R, T);
            if (!(b.v_minus < b.v_plus) || !(b.h_minus < b.h_plus) || !(b.h_minus > 0.0) ||
                !(b.v_minus > 0.0)) {
                CAPTURE(T, R);
                REQUIRE(b.v_minus < b.v_plus);
                REQUIRE(b.h_minus < b.h_plus);
            }
            ++n_checked;
        }
    }
    CHECK(n_checked >= 10000);

    // fine scan: the envelope hands off between families without jumps
    for (double T : {1.0, 0.1}) {
        const auto Rs = barrier_detail::log_spaced(1e-4 * R_face, R_face, 4000);
        BarrierValues prev = eval_suite(s, Rs[0], T);
        for (std::size_t i = 1; i < Rs.size(); ++i) {
            const auto b = eval_suite(s, Rs[i], T);
            CAPTURE(T, Rs[i]);
            REQUIRE(std::abs(b.v_plus - prev.v_plus) <= 0.02 * (std::abs(prev.v_plus) + 1e-12));
            REQUIRE(std::abs(b.v_minus - prev.v_minus) <= 0.02 * (std::abs(prev.v_minus) + 1e-12));
            REQUIRE(std::abs(b.h_plus - prev.h_plus) <= 0.02 * (std::abs(prev.h_plus) + 1e-12));
            REQUIRE(std::abs(b.h_minus - prev.h_minus) <= 0.02 * (std::abs(prev.h_minus) + 1e-12));
            prev = b;
        }
    }
}

TEST_CASE("axis values are smooth caps") {
    const auto& s = certified();
    for (double T : {1.0, 0.2, 1e-4}) {
        const auto b = eval_suite(s, 0.0, T);
        // B(0) = 1 and C(0) = 0: both v barriers close at 1 on the axis
        CHECK(b.v_plus == Approx(1.0).margin(1e-9));
        CHECK(b.v_minus == Approx(1.0).margin(1e-9));
        CHECK(b.h_plus > b.h_minus);
        CHECK(b.h_minus > 0.0);
    }
}

TEST_CASE("outer slice brackets the cone aperture") {
    const auto& s = certified();
    const auto& c = s.c;
    // far from the parabolic scale x -> 0 and v_pm -> a_pm^2 / L: the
    // envelope pinches the k^2/L cone with relative width ~ delta
    const double R = std::exp(c.log_r_star - c.tau_star / 2.0); // face, rho ~ 62
    const double Lr = -(c.tau_star / 2.0 + std::log(R));        // -log r, T-independent
    for (double T : {1.0, 1e-2}) {
        const auto b = eval_suite(s, R, T);
        const double cone = c.k * c.k / Lr;
        CHECK(b.v_plus / cone > 1.0);
        CHECK(b.v_plus / cone < 1.0 + c.delta + 2.0 * c.epsilon);
        CHECK(b.v_minus / cone < 1.0);
        CHECK(b.v_minus / cone > 1.0 - c.delta - 2.0 * c.epsilon);
    }
}

TEST_CASE("defect certification sweep passes strictly") {
    const auto& s = certified();
    const auto rep = certify_defects(s);
    CHECK(rep.pass);
    CHECK(rep.total_samples >= 100000);
    CHECK(rep.entries.size() == 12);
    for (const auto& e : rep.entries) {
        CAPTURE(e.name);
        CHECK(e.pass);
        CHECK(e.samples > 0);
        CHECK(e.min_raw > 0.0);
    }
    // report serializes with its argmin witnesses
    const json j = to_json(rep);
    CHECK(j.at("pass").get<bool>());
    CHECK(j.at("inequalities").size() == 12);
}

TEST_CASE("gluing inequalities hold on the time ladder") {
    const auto& s = certified();
    const auto rep = certify_gluing(s, gluing_time_ladder(s.c, 100));
    CHECK(rep.pass);
    CHECK(rep.entries.size() == 8);
    for (const auto& e : rep.entries) {
        CAPTURE(e.name);
        CHECK(e.samples >= 100);
        CHECK(e.min_raw > 0.0);
    }
}

TEST_CASE("corrupted dominance constant is caught") {
    BarrierSuite bad = certified();
    bad.c.D *= 0.5;
    const auto rep = certify_defects(bad);
    CHECK_FALSE(rep.pass);
    bool located = false;
    for (const auto& e : rep.entries) {
        if (e.pass) continue;
        CHECK(e.min_raw <= 0.0);
        CHECK(e.name.rfind("parabolic", 0) == 0); // D guards the parabolic quadratics
        CHECK(e.argmin_tau <= bad.c.tau_star);
        located = true;
    }
    CHECK(located);
    CHECK_FALSE(certify_gluing(bad, gluing_time_ladder(bad.c, 25)).pass);
}

TEST_CASE("trapping monitor classifies rescaled states") {
    const auto& s = certified();
    const double T = 0.7;
    const double R_face = std::exp(s.c.log_r_star - s.c.tau_star / 2.0);
    const auto Rs = barrier_detail::log_spaced(1e-3, 0.999 * R_face, 80);

    RadialState mid;
    mid.p = s.c.p;
    mid.q = s.c.q;
    for (double R : Rs) {
        const auto b = eval_suite(s, R, T);
        mid.r.push_back(R);
        mid.v.push_back(0.5 * (b.v_minus + b.v_plus));
        mid.h.push_back(0.5 * (b.h_minus + b.h_plus));
    }

    SECTION("envelope midpoint is trapped") {
        const auto res = trapping_monitor(mid, s, T);
        CHECK(res.status == TrapStatus::Trapped);
    }

    SECTION("h displaced above the upper barrier is crossed in the interior") {
        RadialState bad = mid;
        const std::size_t j = bad.size() / 2;
        const auto b = eval_suite(s, bad.r[j], T);
        bad.h[j] = 1.2 * b.h_plus;
        const auto res = trapping_monitor(bad, s, T);
        CHECK(res.status == TrapStatus::Crossed);
        CHECK(res.barrier == "h_plus");
        CHECK_FALSE(res.on_parabolic_boundary);
        CHECK(res.r == Approx(bad.r[j]));
        CHECK(res.excess > 0.0);
    }

    SECTION("v displaced below the lower barrier is crossed") {
        RadialState bad = mid;
        const std::size_t j = 3 * bad.size() / 4;
        const auto b = eval_suite(s, bad.r[j], T);
        bad.v[j] = 0.8 * b.v_minus;
        const auto res = trapping_monitor(bad, s, T);
        CHECK(res.status == TrapStatus::Crossed);
        CHECK(res.barrier == "v_minus");
    }

    SECTION("crossing at the box face is flagged as boundary") {
        RadialState bad = mid;
        const std::size_t j = bad.size() - 1;
        bad.r[j] = R_face * std::exp(-0.005); // inside the boundary band
        const auto b = eval_suite(s, bad.r[j], T);
        bad.h[j] = 1.2 * b.h_plus;
        const auto res = trapping_monitor(bad, s, T);
        CHECK(res.status == TrapStatus::Crossed);
        CHECK(res.on_parabolic_boundary);
    }

    SECTION("times past the box corner are outside") {
        CHECK(trapping_monitor(mid, s, 1.5).status == TrapStatus::OutsideBox);
    }
}

TEST_CASE("suite construction and certification are deterministic") {
    const auto s1 = build_suite(1.0, 1, 2, 0.05, 0.05, tables());
    const auto s2 = build_suite(1.0, 1, 2, 0.05, 0.05, tables());
    CHECK(suite_to_json(s1).dump() == suite_to_json(s2).dump());
    CHECK(to_json(certify_defects(s1, DefectSweep::coarse())).dump() ==
          to_json(certify_defects(s2, DefectSweep::coarse())).dump());
    CHECK(to_json(certify_gluing(s1, gluing_time_ladder(s1.c, 25))).dump() ==
          to_json(certify_gluing(s2, gluing_time_ladder(s2.c, 25))).dump());
}
