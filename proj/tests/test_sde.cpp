#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "qrelax/filtering.hpp"
#include "qrelax/relaxation.hpp"
#include "qrelax/sde.hpp"
#include "qrelax/spectrum.hpp"

using namespace qrelax;
using numerics::pi;
using filtering::StateVector;

namespace {

StateVector quench_state(int n, double alpha, int truncation) {
    return filtering::initial_state(spectrum::make_transition_row(n, alpha, truncation));
}

std::vector<double> energies_for(double alpha, int truncation) {
    WellModel w;
    w.expansion = alpha;
    w.truncation = truncation;
    return spectrum::post_expansion_energies(w);
}

StateVector eigenstate(std::size_t index, std::size_t n_modes) {
    StateVector s;
    s.amplitudes.assign(n_modes, {0.0, 0.0});
    s.amplitudes[index] = {1.0, 0.0};
    return s;
}

} // namespace

TEST_CASE("drift and diffusion vanish on eigenstates") {
    auto energies = energies_for(2.5, 6);
    auto state = eigenstate(2, energies.size());
    auto dd = sde::drift_diffusion(state, energies, 1.0);
    CHECK(dd.energy == Catch::Approx(energies[2]).epsilon(1e-14));
    CHECK(dd.variance == 0.0);
    for (std::size_t m = 0; m < energies.size(); ++m) {
        CHECK(std::abs(dd.diffusion[m]) == 0.0);
        std::complex<double> expected =
            m == 2 ? std::complex<double>(0.0, -energies[2]) : std::complex<double>(0.0, 0.0);
        CHECK(std::abs(dd.drift[m] - expected) < 1e-14);
    }
}

TEST_CASE("two-level coefficients against hand algebra") {
    std::vector<double> energies = {0.0, 1.0};
    StateVector s;
    double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    s.amplitudes = {{inv_sqrt2, 0.0}, {inv_sqrt2, 0.0}};
    double sigma = 0.8;
    auto dd = sde::drift_diffusion(s, energies, sigma);
    CHECK(dd.energy == Catch::Approx(0.5).epsilon(1e-14));
    CHECK(dd.variance == Catch::Approx(0.25).epsilon(1e-14));
    // diffusion_m = 1/2 sigma (E_m - 1/2) / sqrt(2)
    CHECK(dd.diffusion[0].real() == Catch::Approx(-0.25 * sigma * inv_sqrt2).epsilon(1e-14));
    CHECK(dd.diffusion[1].real() == Catch::Approx(0.25 * sigma * inv_sqrt2).epsilon(1e-14));
    // drift_m = (-i E_m - sigma^2 (E_m - 1/2)^2 / 8) / sqrt(2)
    double damp = sigma * sigma * 0.25 * 0.125;
    CHECK(dd.drift[0].real() == Catch::Approx(-damp * inv_sqrt2).epsilon(1e-12));
    CHECK(dd.drift[0].imag() == Catch::Approx(0.0).margin(1e-15));
    CHECK(dd.drift[1].imag() == Catch::Approx(-inv_sqrt2).epsilon(1e-12));

    StateVector bad = s;
    bad.amplitudes[0] *= 1.1;
    CHECK_THROWS_AS(sde::drift_diffusion(bad, energies, sigma), std::invalid_argument);
}

TEST_CASE("sigma = 0 leaves pure phase evolution") {
    auto energies = energies_for(2.5, 6);
    auto state = quench_state(1, 2.5, 6);
    auto dd = sde::drift_diffusion(state, energies, 0.0);
    for (std::size_t m = 0; m < energies.size(); ++m) {
        CHECK(std::abs(dd.diffusion[m]) == 0.0);
        CHECK(dd.drift[m].real() == Catch::Approx(0.0).margin(1e-15));
    }

    // one unrenormalised step: moduli preserved to O(dt^2)
    sde::IntegratorConfig cfg;
    cfg.sigma = 0.0;
    cfg.renormalise_each_step = false;
    auto defect = [&](double dt) {
        sde::IntegratorConfig c = cfg;
        c.dt = dt;
        auto next = sde::step(state, 0.0, energies, c);
        return std::abs(std::sqrt(next.norm_squared()) - 1.0);
    };
    double d1 = defect(1e-3), d2 = defect(5e-4);
    CHECK(d1 / d2 == Catch::Approx(4.0).epsilon(0.15));

    // local phase error of a single eigenmode is O(dt^2) per step
    std::vector<double> one_level = {energies[3]};
    StateVector mode = eigenstate(0, 1);
    auto phase_err = [&](double dt) {
        sde::IntegratorConfig c = cfg;
        c.dt = dt;
        auto next = sde::step(mode, 0.0, one_level, c);
        auto exact = std::exp(std::complex<double>(0.0, -energies[3] * dt));
        return std::abs(next.amplitudes[0] - exact);
    };
    CHECK(phase_err(1e-4) / phase_err(5e-5) == Catch::Approx(4.0).epsilon(0.15));
}

TEST_CASE("eigenstates are fixed points of the noisy step") {
    auto energies = energies_for(2.5, 6);
    auto state = eigenstate(1, energies.size());
    sde::IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.sigma = 1.0;
    auto next = sde::step(state, 0.42, energies, cfg);
    for (std::size_t m = 0; m < energies.size(); ++m)
        if (m != 1) CHECK(std::abs(next.amplitudes[m]) == 0.0);
    CHECK(std::abs(std::abs(next.amplitudes[1]) - 1.0) < 1e-12);
    CHECK_THROWS_AS(sde::step(state, std::nan(""), energies, cfg), std::invalid_argument);
}

TEST_CASE("unrenormalised norm defect scales linearly in dt") {
    auto energies = energies_for(2.5, 6);
    auto state = quench_state(1, 2.5, 6);
    const double z = 0.7; // fixed normal draw across step sizes
    std::vector<double> dts = {1e-3, 1e-4, 1e-5};
    std::vector<double> log_dt, log_defect;
    for (double dt : dts) {
        sde::IntegratorConfig cfg;
        cfg.dt = dt;
        cfg.sigma = 1.0;
        cfg.renormalise_each_step = false;
        auto next = sde::step(state, z * std::sqrt(dt), energies, cfg);
        log_dt.push_back(std::log(dt));
        log_defect.push_back(std::log(std::abs(std::sqrt(next.norm_squared()) - 1.0)));
    }
    // least-squares slope in log-log
    double mx = numerics::mean(log_dt), my = numerics::mean(log_defect);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < log_dt.size(); ++i) {
        sxy += (log_dt[i] - mx) * (log_defect[i] - my);
        sxx += (log_dt[i] - mx) * (log_dt[i] - mx);
    }
    double slope = sxy / sxx;
    INFO("norm defect slope = " << slope);
    CHECK(std::abs(slope - 1.0) < 0.2);

    // with renormalisation the norm is pinned every step
    sde::IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.sigma = 1.0;
    auto stream = rng::make_normal_stream(11, 0);
    auto s = state;
    for (int k = 0; k < 200; ++k) {
        s = sde::step(s, std::sqrt(cfg.dt) * stream.next(), energies, cfg);
        REQUIRE(std::abs(s.norm_squared() - 1.0) < 1e-12);
    }
}

TEST_CASE("eigenstate start keeps a flat energy path under any noise") {
    auto energies = energies_for(2.5, 6);
    auto grid = numerics::linspace(0.0, 0.5, 501);
    auto stream = rng::make_normal_stream(3, 0);
    auto noise = filtering::sample_brownian(grid, stream);
    sde::IntegratorConfig cfg;
    cfg.sigma = 1.0;
    cfg.truncation = 6;
    auto states = sde::integrate_with_noise(eigenstate(2, 6), grid, noise, energies, cfg);
    auto h = sde::energy_path(states, energies);
    for (double v : h) CHECK(v == Catch::Approx(energies[2]).epsilon(1e-12));

    std::vector<double> short_noise = {0.0};
    CHECK_THROWS_AS(
        sde::integrate_with_noise(eigenstate(2, 6), grid, short_noise, energies, cfg),
        std::invalid_argument);
}

TEST_CASE("noiseless integration matches unitary phase evolution") {
    auto energies = energies_for(2.5, 4);
    auto state = quench_state(1, 2.5, 4);
    auto grid = numerics::linspace(0.0, 0.02, 201);
    std::vector<double> no_noise(grid.size(), 0.0);
    sde::IntegratorConfig cfg;
    cfg.sigma = 1e-30; // config requires positive sigma; effectively unitary
    cfg.truncation = 4;
    cfg.renormalise_each_step = true;
    auto states = sde::integrate_with_noise(state, grid, no_noise, energies, cfg);
    for (std::size_t m = 0; m < energies.size(); ++m) {
        auto exact = state.amplitudes[m] *
                     std::exp(std::complex<double>(0.0, -energies[m] * grid.back()));
        CHECK(std::abs(states.back().amplitudes[m] - exact) < 1e-3);
    }
}

TEST_CASE("energy increments are centred with the predicted variance") {
    auto energies = energies_for(2.5, 6);
    auto row = spectrum::make_transition_row(1, 2.5, 6);
    const double dt = 1e-4, t_end = 0.05;
    auto grid = numerics::linspace(0.0, t_end, static_cast<std::size_t>(t_end / dt) + 1);
    sde::IntegratorConfig cfg;
    cfg.sigma = 1.0;
    cfg.truncation = 6;
    cfg.dt = dt;

    double sum_dh = 0.0, sum_var_pred = 0.0;
    std::vector<double> xs, ys;
    for (std::uint64_t p = 0; p < 400; ++p) {
        auto stream = rng::make_normal_stream(606, p);
        auto noise = filtering::sample_brownian(grid, stream);
        auto states = sde::integrate_with_noise(filtering::initial_state(row), grid, noise,
                                                energies, cfg);
        for (std::size_t k = 0; k + 1 < states.size(); ++k) {
            auto mom = sde::energy_moments(states[k], energies);
            auto mom_next = sde::energy_moments(states[k + 1], energies);
            double dh = mom_next.energy - mom.energy;
            double pred = mom.variance * mom.variance * dt; // sigma = 1
            sum_dh += dh;
            sum_var_pred += pred;
            xs.push_back(pred);
            ys.push_back(dh * dh);
        }
    }
    double z = sum_dh / std::sqrt(sum_var_pred);
    INFO("pooled mean-zero z = " << z);
    CHECK(std::abs(z) < 3.0);
    double slope = numerics::regression_slope_through_origin(xs, ys);
    INFO("squared-increment slope = " << slope);
    CHECK(std::abs(slope - 1.0) < 0.15);
}

TEST_CASE("variance increments decay at the predicted rate with beta noise loading") {
    auto energies = energies_for(2.5, 6);
    auto row = spectrum::make_transition_row(1, 2.5, 6);
    const double dt = 1e-4, t_end = 0.05;
    auto grid = numerics::linspace(0.0, t_end, static_cast<std::size_t>(t_end / dt) + 1);
    sde::IntegratorConfig cfg;
    cfg.sigma = 1.0;
    cfg.truncation = 6;
    cfg.dt = dt;

    // regression of dV on -V^2 dt for the decay rate, and of the squared
    // residual on the third-moment loading sigma^2 beta^2 dt for the noise
    std::vector<double> xs, ys, loads, resid_sq;
    for (std::uint64_t p = 0; p < 800; ++p) {
        auto stream = rng::make_normal_stream(707, p);
        auto noise = filtering::sample_brownian(grid, stream);
        auto states = sde::integrate_with_noise(filtering::initial_state(row), grid, noise,
                                                energies, cfg);
        for (std::size_t k = 0; k + 1 < states.size(); ++k) {
            auto mom = sde::energy_moments(states[k], energies);
            auto mom_next = sde::energy_moments(states[k + 1], energies);
            double dv = mom_next.variance - mom.variance;
            double x = -mom.variance * mom.variance * dt;
            xs.push_back(x);
            ys.push_back(dv);
            loads.push_back(mom.third_central * mom.third_central * dt);
            resid_sq.push_back((dv - x) * (dv - x));
        }
    }
    double slope = numerics::regression_slope_through_origin(xs, ys);
    INFO("variance-decay slope = " << slope << " over " << xs.size() << " increments");
    CHECK(std::abs(slope - 1.0) < 0.15);
    // residual second moments track the beta loading
    double noise_slope = numerics::regression_slope_through_origin(loads, resid_sq);
    INFO("noise-loading slope = " << noise_slope);
    CHECK(std::abs(noise_slope - 1.0) < 0.15);
}

TEST_CASE("numerical route reaches the analytic terminal eigenstate") {
    const int n_modes = 8;
    auto energies = energies_for(2.5, n_modes);
    auto row = spectrum::make_transition_row(1, 2.5, n_modes);
    double t_end = 10.0 * relaxation::tau_relax(2.5, 2, 1.0, 10.0);
    const double dt = 2e-4;
    auto grid = numerics::linspace(0.0, t_end, static_cast<std::size_t>(t_end / dt) + 1);
    sde::IntegratorConfig cfg;
    cfg.sigma = 1.0;
    cfg.truncation = n_modes;
    cfg.dt = dt;

    int agreements = 0;
    for (std::uint64_t p = 0; p < 10; ++p) {
        filtering::SdeConfig sc;
        sc.sigma = 1.0;
        sc.time_grid = grid;
        sc.rng_seed = 909;
        auto traj = filtering::simulate_trajectory(row, energies, sc, p);
        auto states = sde::integrate_with_noise(filtering::initial_state(row), grid,
                                                traj.innovations, energies, cfg);
        std::size_t best = 0;
        for (std::size_t m = 1; m < energies.size(); ++m)
            if (std::norm(states.back().amplitudes[m]) >
                std::norm(states.back().amplitudes[best]))
                best = m;
        if (static_cast<int>(best) + 1 == traj.terminal_mode()) ++agreements;
    }
    CHECK(agreements == 10);
}
