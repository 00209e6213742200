#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qrelax/numerics.hpp"

using namespace qrelax::numerics;

TEST_CASE("kahan summation keeps small terms") {
    KahanSum acc;
    acc.add(1.0);
    for (int i = 0; i < 10000000; ++i) acc.add(1e-16);
    CHECK(acc.value() == Catch::Approx(1.0 + 1e-9).epsilon(1e-12));
}

TEST_CASE("geomspace endpoints and ratios") {
    auto g = geomspace(0.01, 10.0, 16);
    CHECK(g.front() == 0.01);
    CHECK(g.back() == 10.0);
    double r = g[1] / g[0];
    for (std::size_t i = 2; i < g.size(); ++i)
        CHECK(g[i] / g[i - 1] == Catch::Approx(r).epsilon(1e-10));
    CHECK_THROWS_AS(geomspace(0.0, 1.0, 4), std::invalid_argument);
}

TEST_CASE("trapezoid and cumulative trapezoid") {
    auto t = linspace(0.0, 1.0, 501);
    std::vector<double> f(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) f[i] = t[i] * t[i];
    CHECK(trapezoid(t, f) == Catch::Approx(1.0 / 3.0).margin(1e-5));
    auto c = cumulative_trapezoid(t, f);
    CHECK(c.front() == 0.0);
    CHECK(c.back() == Catch::Approx(trapezoid(t, f)));
}

TEST_CASE("softmax shifts the maximum exponent") {
    std::vector<double> w = {1000.0, 1001.0, 999.0};
    auto p = softmax(w);
    double norm = std::exp(0.0) + std::exp(1.0) + std::exp(-1.0);
    CHECK(p[1] == Catch::Approx(std::exp(1.0) / norm).epsilon(1e-12));
    double sum = p[0] + p[1] + p[2];
    CHECK(sum == Catch::Approx(1.0).epsilon(1e-15));

    std::vector<double> huge = {-1e8, -1e8 + 3.0};
    auto q = softmax(huge);
    CHECK(q[1] == Catch::Approx(std::exp(3.0) / (1.0 + std::exp(3.0))).epsilon(1e-12));

    std::vector<double> dead = {-std::numeric_limits<double>::infinity(),
                                -std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(softmax(dead), std::domain_error);
}

TEST_CASE("regression slope through origin") {
    std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
    std::vector<double> y = {2.0, 4.1, 5.9, 8.0};
    CHECK(regression_slope_through_origin(x, y) == Catch::Approx(2.0).margin(0.02));
}
