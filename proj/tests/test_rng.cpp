#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qrelax/rng.hpp"

using namespace qrelax;

TEST_CASE("streams are deterministic and distinct") {
    auto a1 = rng::make_stream(42, 7);
    auto a2 = rng::make_stream(42, 7);
    auto b = rng::make_stream(42, 8);
    bool differs = false;
    for (int i = 0; i < 16; ++i) {
        auto x = a1.next();
        CHECK(x == a2.next());
        if (x != b.next()) differs = true;
    }
    CHECK(differs);
}

TEST_CASE("uniform draws live in [0,1)") {
    auto g = rng::make_stream(1, 0);
    for (int i = 0; i < 10000; ++i) {
        double u = g.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("normal sampler moments") {
    auto g = rng::make_normal_stream(123, 0);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = g.next();
        sum += z;
        sum2 += z * z;
        sum4 += z * z * z * z;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    double kurt = sum4 / n;
    // 3-sigma bands for the sample moments of N(0,1).
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(kurt - 3.0) < 3.0 * std::sqrt(96.0 / n));
}
