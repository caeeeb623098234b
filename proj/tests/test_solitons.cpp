#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "warpflow/solitons.hpp"

using namespace warpflow;

namespace {
// built once; the builder itself is part of what the timing criterion covers
const SolitonHierarchy& hierarchy(int q) {
    static SolitonHierarchy h2 = build_soliton_hierarchy(2);
    static SolitonHierarchy h3 = build_soliton_hierarchy(3);
    return q == 2 ? h2 : h3;
}
} // namespace

TEST_CASE("gradient profile normalization and tail") {
    for (int q : {2, 3}) {
        const auto& H = hierarchy(q);
        CAPTURE(q);
        CHECK(H.B.val[0] == 1.0);
        CHECK(H.B.der[0] == 0.0);
        // frozen tip scales; two independent integrators agree on a_q^2/12
        const double b0_ref = alpha_sq(q) / 12.0;
        CHECK(H.b0_sq == Catch::Approx(b0_ref).epsilon(1e-6));
        // normalized tail: zeta^2 B -> 1
        CHECK(50.0 * 50.0 * H.B.value(50.0) == Catch::Approx(1.0).margin(0.01));
        // subleading coefficient (4-q)/(q-1) from the matched tail
        const double b2_ref = (4.0 - q) / (q - 1.0);
        CHECK(H.B.tail_a == Catch::Approx(1.0).margin(2e-3));
        CHECK(H.B.tail_b == Catch::Approx(b2_ref).margin(0.1 * std::max(1.0, b2_ref)));
        // monotone decreasing
        for (double z = 0.5; z < 100.0; z += 7.3) CHECK(H.B.deriv(z) < 0.0);
    }
}

TEST_CASE("gradient profile satisfies its steady equation through the interpolant") {
    for (int q : {2, 3}) {
        CAPTURE(q);
        CHECK(max_residual_B(hierarchy(q)) < 1e-8);
    }
}

TEST_CASE("linearized correction profile: positivity, tail, residual") {
    for (int q : {2, 3}) {
        const auto& H = hierarchy(q);
        CAPTURE(q);
        CHECK(H.C.val[0] == 0.0);
        for (double z = 0.1; z < 100.0; z += 3.7) CHECK(H.C.value(z) > 0.0);
        // frozen values from the independent quadrature run
        const double c50_ref = q == 2 ? 0.5030 : 0.2506;
        CHECK(H.C.value(50.0) == Catch::Approx(c50_ref).epsilon(2e-3));
        // limit 1/alpha_q^2
        CHECK(H.C.tail_c == Catch::Approx(1.0 / alpha_sq(q)).epsilon(1e-12));
        CHECK(max_residual_C(hierarchy(q)) < 1e-4);
    }
}

TEST_CASE("warping response profile: growth law and residual") {
    for (int q : {2, 3}) {
        const auto& H = hierarchy(q);
        CAPTURE(q);
        CHECK(H.A.val[0] == 0.0);
        CHECK(H.A.der[0] == 0.0);
        const double a80_ref = q == 2 ? 1.9942 : 3.9954;
        CHECK(H.A.value(80.0) / (80.0 * 80.0) == Catch::Approx(a80_ref).epsilon(2e-3));
        CHECK(H.A.value(80.0) / (80.0 * 80.0) == Catch::Approx(2.0 * (q - 1)).epsilon(0.02));
        CHECK(max_residual_A(hierarchy(q)) < 1e-6);
        // strictly increasing
        for (double z = 0.5; z < 100.0; z += 7.3) CHECK(H.A.deriv(z) > 0.0);
    }
}

TEST_CASE("tables continue C1 across the tail seam") {
    for (int q : {2, 3}) {
        const auto& H = hierarchy(q);
        const double zm = H.B.zeta_max();
        for (const auto* T : {&H.B, &H.C, &H.A}) {
            CAPTURE(q, T->zeta_max());
            CHECK(T->value(zm - 1e-9) == Catch::Approx(T->value(zm + 1e-9)).margin(1e-7));
            CHECK(T->deriv(zm - 1e-9) == Catch::Approx(T->deriv(zm + 1e-9)).margin(1e-6));
        }
    }
}

TEST_CASE("builder rejects degenerate parameters") {
    CHECK_THROWS_AS(build_soliton_hierarchy(1), config_error);
    CHECK_THROWS_AS(build_soliton_hierarchy(2, 100.0, 0.0125, 0), config_error);
}
