#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qrelax/adiabatic.hpp"
#include "qrelax/spectrum.hpp"

using namespace qrelax;
using numerics::pi;

namespace {

adiabatic::TimeDependentWell linear_well(double rate, int truncation = 6) {
    adiabatic::TimeDependentWell w;
    w.rate = rate;
    w.truncation = truncation;
    return w;
}

std::vector<double> quench_occupation(int n, double alpha, int truncation) {
    auto row = spectrum::make_transition_row(n, alpha, truncation);
    double total = row.probability_sum();
    std::vector<double> occ(row.probs.size());
    for (std::size_t m = 0; m < occ.size(); ++m) occ[m] = row.probs[m] / total;
    return occ;
}

} // namespace

TEST_CASE("instantaneous spectrum follows the schedule") {
    auto frozen = linear_well(0.0);
    auto e0 = adiabatic::instantaneous_spectrum(0.0, frozen);
    auto e5 = adiabatic::instantaneous_spectrum(5.0, frozen);
    CHECK(e0 == e5);
    CHECK(e0[0] == Catch::Approx(pi * pi).epsilon(1e-15));

    auto moving = linear_well(0.5);
    // L(2) = 2 L0 quarters every level
    auto late = adiabatic::instantaneous_spectrum(2.0, moving);
    for (std::size_t k = 0; k < late.size(); ++k)
        CHECK(late[k] == Catch::Approx(0.25 * e0[k]).epsilon(1e-13));
}

TEST_CASE("energy rates: analytic for the linear schedule, differenced otherwise") {
    auto well = linear_well(0.2);
    double t = 1.5;
    auto e = adiabatic::instantaneous_spectrum(t, well);
    auto edot = adiabatic::instantaneous_energy_rates(t, well, 1e-3);
    for (std::size_t k = 0; k < e.size(); ++k)
        CHECK(edot[k] == Catch::Approx(-2.0 * 0.2 / (1.0 + 0.2 * t) * e[k]).epsilon(1e-12));

    adiabatic::TimeDependentWell custom;
    custom.truncation = 6;
    custom.custom_schedule = [](double s) { return 1.0 + 0.1 * s + 0.05 * s * s; };
    double Ldot = 0.1 + 0.1 * t;
    double L = custom.custom_schedule(t);
    auto edot_custom = adiabatic::instantaneous_energy_rates(t, custom, 1e-4);
    auto e_custom = adiabatic::instantaneous_spectrum(t, custom);
    for (std::size_t k = 0; k < e_custom.size(); ++k)
        CHECK(edot_custom[k] == Catch::Approx(-2.0 * Ldot / L * e_custom[k]).epsilon(1e-6));
}

TEST_CASE("occupation step: eigenstates are exact fixed points") {
    std::vector<double> energies = {1.0, 4.0, 9.0};
    std::vector<double> occ = {0.0, 1.0, 0.0};
    long clamps = 0;
    auto next = adiabatic::pi_step(occ, 0.83, 1e-3, energies, 1.0, &clamps);
    CHECK(next[0] == 0.0);
    CHECK(next[1] == 1.0);
    CHECK(next[2] == 0.0);
    CHECK(clamps == 0);
}

TEST_CASE("occupation step: two-level increment matches hand algebra") {
    std::vector<double> energies = {0.0, 1.0};
    std::vector<double> occ = {0.5, 0.5};
    double sigma = 1.3, dW = 0.01;
    auto next = adiabatic::pi_step(occ, dW, 1e-3, energies, sigma, nullptr);
    // dPi^1 = sigma (0 - 1/2) * 1/2 dW = -sigma dW / 4, and the sum stays 1
    CHECK(next[0] == Catch::Approx(0.5 - sigma * dW / 4.0).epsilon(1e-14));
    CHECK(next[0] + next[1] == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("occupation step clamps negative excursions and renormalises") {
    std::vector<double> energies = {0.0, 10.0};
    std::vector<double> occ = {0.5, 0.5};
    long clamps = 0;
    // dW large enough to push the first component negative
    auto next = adiabatic::pi_step(occ, 0.5, 1e-3, energies, 1.0, &clamps);
    CHECK(clamps == 1);
    CHECK(next[0] == 0.0);
    CHECK(next[1] == 1.0);
}

TEST_CASE("occupation means are conserved across an ensemble") {
    // the step multiplier sigma (E_k - H) sqrt(dt) must stay well below one
    // for every retained mode, or clamping biases the means
    auto well = linear_well(0.05, 4);
    auto pi0 = quench_occupation(1, 2.5, 4);
    const int paths = 500;
    std::vector<double> terminal_mean(pi0.size(), 0.0), terminal_sq(pi0.size(), 0.0);
    long clamps = 0;
    for (int p = 0; p < paths; ++p) {
        auto path = adiabatic::simulate_pi_process(well, pi0, 1.0, 1e-4, 1.0, 515,
                                                   static_cast<std::uint64_t>(p), 10000);
        clamps += path.clamp_events;
        const auto& last = path.occupation.back();
        for (std::size_t k = 0; k < pi0.size(); ++k) {
            terminal_mean[k] += last[k];
            terminal_sq[k] += last[k] * last[k];
        }
        // the sum stays normalised step by step
        for (const auto& occ : path.occupation) {
            double s = 0.0;
            for (double x : occ) s += x;
            REQUIRE(std::abs(s - 1.0) < 1e-9);
        }
    }
    INFO("clamp events: " << clamps);
    for (std::size_t k = 0; k < pi0.size(); ++k) {
        double mean = terminal_mean[k] / paths;
        double var = terminal_sq[k] / paths - mean * mean;
        double se = std::sqrt(std::max(var, 1e-12) / paths);
        INFO("mode " << k + 1 << ": mean " << mean << " vs " << pi0[k] << " (se " << se << ")");
        CHECK(std::abs(mean - pi0[k]) < 3.0 * se + 1e-6);
    }
}

TEST_CASE("eigenstate-initialised occupation never moves") {
    auto well = linear_well(0.3);
    std::vector<double> pi0(6, 0.0);
    pi0[0] = 1.0;
    auto path = adiabatic::simulate_pi_process(well, pi0, 1.0, 1e-3, 2.0, 99, 0, 100);
    for (const auto& occ : path.occupation) {
        CHECK(occ[0] == 1.0);
        for (std::size_t k = 1; k < occ.size(); ++k) CHECK(occ[k] == 0.0);
    }
    CHECK(path.clamp_events == 0);
    for (double v : path.variance) CHECK(v == 0.0);
}

TEST_CASE("drifted energy increment") {
    std::vector<double> occ = {0.25, 0.75};
    std::vector<double> e_now = {1.0, 4.0};
    std::vector<double> e_next = {0.99, 3.96};
    double dt = 0.01, sigma = 1.0, dW = 0.02;

    double h = 0.25 * 1.0 + 0.75 * 4.0;
    double v = 0.25 * (1.0 - h) * (1.0 - h) + 0.75 * (4.0 - h) * (4.0 - h);
    double hdot = (0.25 * (-0.01) + 0.75 * (-0.04)) / dt;
    double expected = hdot * dt + sigma * v * dW;
    CHECK(adiabatic::drifted_energy_increment(occ, e_now, e_next, dt, sigma, dW) ==
          Catch::Approx(expected).epsilon(1e-12));

    // frozen schedule reduces to the pure noise increment
    CHECK(adiabatic::drifted_energy_increment(occ, e_now, e_now, dt, sigma, dW) ==
          Catch::Approx(sigma * v * dW).epsilon(1e-12));

    // eigenstate: dH = Edot dt exactly
    std::vector<double> pure = {1.0, 0.0};
    CHECK(adiabatic::drifted_energy_increment(pure, e_now, e_next, dt, sigma, dW) ==
          Catch::Approx(-0.01).epsilon(1e-12));

    // expanding well pushes every level down
    auto well = linear_well(0.4);
    auto e0 = adiabatic::instantaneous_spectrum(0.0, well);
    auto edot = adiabatic::instantaneous_energy_rates(0.0, well, 1e-3);
    double drift = adiabatic::occupation_mean(occ, std::span<const double>(edot).first(2));
    CHECK(drift < 0.0);
}

TEST_CASE("supermartingale condition and covariance drift") {
    std::vector<double> occ = {0.5, 0.5};
    std::vector<double> energies = {0.0, 1.0};
    std::vector<double> frozen_rates = {0.0, 0.0};
    auto check = adiabatic::supermartingale_condition(occ, energies, frozen_rates, 1.0);
    CHECK(check.state == adiabatic::ConditionState::holds);
    CHECK(check.lhs == 0.0);

    std::vector<double> pure = {1.0, 0.0};
    auto reduced = adiabatic::supermartingale_condition(pure, energies, frozen_rates, 1.0);
    CHECK(reduced.state == adiabatic::ConditionState::reduced);

    // covariance drift: occupations (1/2, 1/2), E = (0,1), Edot = (0,-1)
    std::vector<double> rates = {0.0, -1.0};
    CHECK(adiabatic::variance_covariance_drift(occ, energies, rates) ==
          Catch::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("condition threshold: bisection agrees with the closed form") {
    auto pi0 = quench_occupation(1, 2.5, 6);
    double sigma = 1.0;
    auto well_at = [&](double v) { return linear_well(v); };
    auto holds_at_start = [&](double v) {
        auto w = well_at(v);
        auto e = adiabatic::instantaneous_spectrum(0.0, w);
        auto edot = adiabatic::instantaneous_energy_rates(0.0, w, 1e-4);
        return adiabatic::supermartingale_condition(pi0, e, edot, sigma).state ==
               adiabatic::ConditionState::holds;
    };
    auto e0 = adiabatic::instantaneous_spectrum(0.0, well_at(0.0));
    double h0 = adiabatic::occupation_mean(pi0, e0);
    double v0 = adiabatic::occupation_variance(pi0, e0, h0);
    double analytic = sigma * sigma * v0 / 4.0;

    double lo = 0.0, hi = 4.0 * analytic;
    REQUIRE(holds_at_start(lo + 1e-12));
    REQUIRE(!holds_at_start(hi));
    for (int i = 0; i < 60; ++i) {
        double mid = 0.5 * (lo + hi);
        (holds_at_start(mid) ? lo : hi) = mid;
    }
    double bisected = 0.5 * (lo + hi);
    CHECK(std::abs(bisected - analytic) / analytic < 1e-2);
    CHECK(holds_at_start(0.99 * bisected));
    CHECK(!holds_at_start(1.01 * bisected));
}

TEST_CASE("rate correlation stays within [-1, 1] and is -1 for proportional rates") {
    auto well = linear_well(0.1);
    auto pi0 = quench_occupation(1, 2.5, 6);
    auto path = adiabatic::simulate_pi_process(well, pi0, 1.0, 1e-3, 1.0, 21, 0, 50);
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        auto e = adiabatic::instantaneous_spectrum(path.times[k], well);
        auto edot = adiabatic::instantaneous_energy_rates(path.times[k], well, 1e-4);
        double rho = adiabatic::energy_rate_correlation(path.occupation[k], e, edot);
        REQUIRE(rho >= -1.0 - 1e-12);
        REQUIRE(rho <= 1.0 + 1e-12);
        if (path.variance[k] > 1e-10) CHECK(rho == Catch::Approx(-1.0).margin(1e-9));
    }
}

TEST_CASE("staged small expansions drive the chain into the ground state") {
    // Slower drives = more, smaller quenches. Chain-evaluated reference
    // probabilities for a total expansion of 1.5 split into K stages:
    // K=1: 0.657, K=2: 0.787, K=4: 0.877.
    const int runs = 2000;
    double p1 = adiabatic::staged_expansion_ground_probability(0.5, 1, runs, 77);
    double p2 = adiabatic::staged_expansion_ground_probability(0.5, 2, runs, 78);
    double p4 = adiabatic::staged_expansion_ground_probability(0.5, 4, runs, 79);
    double se = 3.0 * std::sqrt(0.25 / runs) + 0.01;
    CHECK(std::abs(p1 - 0.657) < se);
    CHECK(std::abs(p2 - 0.787) < se);
    CHECK(std::abs(p4 - 0.877) < se);
    CHECK(p1 < p2);
    CHECK(p2 < p4);
}
