#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "warpflow/geometry.hpp"

using namespace warpflow;

namespace {

WarpedProfile round_sphere(int p, int q, std::size_t n) {
    // unit S^{p+q+1}: psi = cos s, phi = sin s on [0, pi/2]
    WarpedProfile w;
    w.p = p;
    w.q = q;
    w.s.resize(n);
    w.psi.resize(n);
    w.phi.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        w.s[i] = 0.5 * pi * double(i) / double(n - 1);
        w.psi[i] = std::cos(w.s[i]);
        w.phi[i] = std::sin(w.s[i]);
    }
    w.psi.back() = 0.0;  // cos(pi/2) rounds to 6e-17
    return w;
}

} // namespace

TEST_CASE("round sphere has all sectional curvatures equal to one") {
    const std::size_t n = 201;
    const auto w = round_sphere(1, 2, n);
    const auto c = compute_curvatures(w);
    const double ds = w.s[1] - w.s[0];
    for (std::size_t i = 0; i < n; ++i) {
        CAPTURE(i, w.s[i]);
        // the (1 - f_s^2)/f^2 quotients amplify the O(ds^2) stencil error to
        // O((ds/s)^2) relative near a pole; check 1e-2 there, 2e-3 inside
        const double dist = std::min(w.s[i], w.s[n - 1] - w.s[i]);
        const double m = (i == 0 || i + 1 == n) ? 2e-3 : (dist < 20.0 * ds ? 1e-2 * sq(20.0 * ds / dist) : 2e-3);
        CHECK(c.L_phi[i] == Catch::Approx(1.0).margin(m));
        CHECK(c.L_psi[i] == Catch::Approx(1.0).margin(m));
        CHECK(c.K_phi[i] == Catch::Approx(1.0).margin(m));
        CHECK(c.K_psi[i] == Catch::Approx(1.0).margin(m));
        CHECK(c.J[i] == Catch::Approx(1.0).margin(m));  // sign convention: +1 here
    }
    const double expected = std::sqrt(0.5 * 2 * 1 + 0.0 + 2.0 + 1.0 + 2.0);
    CHECK(sup_riem(w) == Catch::Approx(expected).epsilon(0.15));
}

TEST_CASE("flat product geometry has the single S^p curvature family") {
    const int p = 2, q = 2;
    WarpedProfile w;
    w.p = p;
    w.q = q;
    const double a = 0.7;
    const std::size_t n = 101;
    w.s.resize(n);
    w.psi.assign(n, a);
    w.phi.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        w.s[i] = 0.1 + 2.0 * double(i) / double(n - 1);
        w.phi[i] = w.s[i];
    }
    const auto c = compute_curvatures(w);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(c.L_phi[i] == Catch::Approx(0.0).margin(1e-10));
        CHECK(c.K_phi[i] == Catch::Approx(0.0).margin(1e-10));
        CHECK(c.K_psi[i] == Catch::Approx(0.0).margin(1e-10));
        CHECK(c.J[i] == Catch::Approx(0.0).margin(1e-10));
        CHECK(c.L_psi[i] == Catch::Approx(1.0 / (a * a)).epsilon(1e-10));
    }
    CHECK(sup_riem(w) == Catch::Approx(std::sqrt(0.5 * p * (p - 1)) / (a * a)).epsilon(1e-9));
}

TEST_CASE("end classification recognizes the boundary-condition table") {
    SECTION("smooth caps of the round sphere") {
        // stencil defect at a cap is O(ds^2); pass a tolerance matching n
        const auto w = round_sphere(1, 2, 401);
        const auto left = classify_end(w, true, 1e-4);
        const auto right = classify_end(w, false, 1e-4);
        CHECK(left.tag == EndClassification::SpTimesDisk);   // phi -> 0
        CHECK(right.tag == EndClassification::SqTimesDisk);  // psi -> 0
        CHECK(left.deriv_defect < 2e-5);
        CHECK(right.deriv_defect < 2e-5);
    }
    SECTION("cone over a product") {
        WarpedProfile w;
        w.p = 1;
        w.q = 2;
        const std::size_t n = 101;
        w.s.resize(n);
        w.psi.resize(n);
        w.phi.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            w.s[i] = 1e-9 + double(i) / double(n - 1);
            w.psi[i] = 0.9 * w.s[i];
            w.phi[i] = 0.3 * w.s[i];
        }
        CHECK(classify_end(w, true).tag == EndClassification::ConeOverProduct);
        CHECK(classify_end(w, false).tag == EndClassification::SmoothClosed);
    }
    SECTION("conical phi end is not mistaken for a smooth cap") {
        WarpedProfile w;
        w.p = 1;
        w.q = 2;
        const std::size_t n = 101;
        w.s.resize(n);
        w.psi.resize(n);
        w.phi.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            w.s[i] = 1e-9 + double(i) / double(n - 1);
            w.psi[i] = 1.0;
            w.phi[i] = 0.3 * w.s[i];  // slope far from 1
        }
        CHECK(classify_end(w, true).tag == EndClassification::Indeterminate);
    }
    SECTION("divergent arclength in the x-gauge") {
        const std::size_t n = 600;
        std::vector<double> x(n), sp(n), one(n, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = double(i) / double(n - 1);
            x[i] = 1.0 - std::pow(2.0, -9.0 * u);  // clusters toward x = 1
            sp[i] = 1.0 / sq(1.0 - x[i] + 1e-12);
        }
        auto w = WarpedProfile::from_x_gauge(1, 2, x, sp, one, one);
        CHECK(classify_end(w, false).tag == EndClassification::InfiniteLength);
        CHECK(classify_end(w, true).tag == EndClassification::SmoothClosed);
    }
}

TEST_CASE("x-gauge construction integrates arclength consistently") {
    const std::size_t n = 201;
    std::vector<double> x(n), sp(n), psi(n), phi(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = double(i) / double(n - 1);
        sp[i] = 1.0 + 0.5 * x[i];  // s = x + x^2/4
        psi[i] = 1.0;
        phi[i] = 1.0 + x[i];
    }
    const auto w = WarpedProfile::from_x_gauge(1, 2, x, sp, psi, phi);
    for (std::size_t i = 0; i < n; i += 40)
        CHECK(w.s[i] == Catch::Approx(x[i] + 0.25 * x[i] * x[i]).margin(1e-6));
}
