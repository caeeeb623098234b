#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "warpflow/grid.hpp"

using namespace warpflow;

namespace {

std::vector<double> stretched_grid(std::size_t n, double L) {
    // mildly nonuniform: x = L * (u + 0.3 u (1-u))
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = double(i) / double(n - 1);
        x[i] = L * (u + 0.3 * u * (1.0 - u));
    }
    return x;
}

} // namespace

TEST_CASE("stencils are exact on quadratics") {
    const double hm = 0.13, hp = 0.07;
    auto f = [](double x) { return 2.0 + 3.0 * x - 5.0 * x * x; };
    const double x0 = 0.4;
    const double d1 = d1_central(f(x0 - hm), f(x0), f(x0 + hp), hm, hp);
    const double d2 = d2_central(f(x0 - hm), f(x0), f(x0 + hp), hm, hp);
    CHECK(d1 == Catch::Approx(3.0 - 10.0 * x0).epsilon(1e-12));
    CHECK(d2 == Catch::Approx(-10.0).epsilon(1e-12));
}

TEST_CASE("differentiate converges at second order on a nonuniform grid") {
    auto err = [](std::size_t n) {
        const auto x = stretched_grid(n, 2.0);
        std::vector<double> f(n);
        for (std::size_t i = 0; i < n; ++i) f[i] = std::sin(x[i]);
        const auto d1 = differentiate(x, f, 1);
        const auto d2 = differentiate(x, f, 2);
        double e = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            e = std::max(e, std::abs(d1[i] - std::cos(x[i])));
            e = std::max(e, std::abs(d2[i] + std::sin(x[i])));
        }
        return e;
    };
    const double e1 = err(101), e2 = err(201);
    const double order = std::log2(e1 / e2);
    CHECK(order > 1.5);  // interior is 2nd order; one-sided ends are the binding constraint
    CHECK(e2 < 2e-3);
}

TEST_CASE("trapezoid rules integrate linear data exactly") {
    const auto x = stretched_grid(41, 1.5);
    std::vector<double> f(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) f[i] = 2.0 * x[i] - 1.0;
    CHECK(trapz(x, f) == Catch::Approx(1.5 * 1.5 - 1.5).epsilon(1e-13));
    const auto F = cumtrapz(x, f);
    CHECK(F.front() == 0.0);
    CHECK(F.back() == Catch::Approx(1.5 * 1.5 - 1.5).epsilon(1e-13));
}

TEST_CASE("pchip interpolation is monotone and interpolatory") {
    std::vector<double> x{0.0, 0.5, 1.0, 2.0, 3.0};
    std::vector<double> f{0.0, 0.02, 0.5, 0.98, 1.0};
    const auto h = HermiteSeries::pchip(x, f);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(h(x[i]) == Catch::Approx(f[i]).margin(1e-14));
    double prev = -1.0;
    for (double t = 0.0; t <= 3.0; t += 0.01) {
        const double y = h(t);
        CHECK(y >= prev - 1e-12);
        prev = y;
    }
}

TEST_CASE("geometric grid covers the interval with bounded cell growth") {
    const auto g = geometric_grid(1.0, 1e-3, 1.05, 0.05);
    REQUIRE(g.size() >= 4);
    CHECK(g.front() == 0.0);
    CHECK(g.back() == Catch::Approx(1.0).margin(1e-14));
    CHECK(g[1] - g[0] == Catch::Approx(1e-3).epsilon(0.02));
    for (std::size_t i = 2; i < g.size(); ++i) {
        const double ratio = (g[i] - g[i - 1]) / (g[i - 1] - g[i - 2]);
        CHECK(ratio < 1.06);
        CHECK(g[i] - g[i - 1] < 0.05 * 1.05 + 1e-12);
    }
    // no sliver at the far end
    const double last = g[g.size() - 1] - g[g.size() - 2];
    const double prevc = g[g.size() - 2] - g[g.size() - 3];
    CHECK(last > 0.25 * prevc);
}

TEST_CASE("smoothstep blends C2-flat at both ends") {
    CHECK(smoothstep2(0.0) == 0.0);
    CHECK(smoothstep2(1.0) == 1.0);
    const double eps = 1e-5;
    CHECK(std::abs(smoothstep2(eps) / eps) < 1e-3);              // slope ~ 0 at 0
    CHECK(std::abs((1.0 - smoothstep2(1.0 - eps)) / eps) < 1e-3);
}
