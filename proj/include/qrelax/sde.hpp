#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "qrelax/filtering.hpp"

namespace qrelax::sde {

using filtering::StateVector;

struct IntegratorConfig {
    double dt = 1e-4;
    bool renormalise_each_step = true;
    double sigma = 1.0;
    int truncation = 8;

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("IntegratorConfig: dt must be > 0");
        if (truncation < 2) throw std::invalid_argument("IntegratorConfig: truncation must be >= 2");
        if (!(sigma > 0.0)) throw std::invalid_argument("IntegratorConfig: sigma must be > 0");
    }
};

struct EnergyMoments {
    double energy = 0.0;      // H
    double variance = 0.0;    // V
    double third_central = 0.0; // beta
};

// Moments of the Hamiltonian in the (possibly unnormalised) state; the
// explicit normalisation makes them invariant under per-step rescaling.
inline EnergyMoments energy_moments(const StateVector& state, std::span<const double> energies) {
    if (state.amplitudes.size() != energies.size())
        throw std::invalid_argument("energy_moments: size mismatch");
    double norm2 = state.norm_squared();
    if (!(norm2 > 0.0)) throw std::domain_error("energy_moments: zero state");
    EnergyMoments mom;
    for (std::size_t m = 0; m < energies.size(); ++m)
        mom.energy += std::norm(state.amplitudes[m]) * energies[m];
    mom.energy /= norm2;
    for (std::size_t m = 0; m < energies.size(); ++m) {
        double d = energies[m] - mom.energy;
        double p = std::norm(state.amplitudes[m]) / norm2;
        mom.variance += p * d * d;
        mom.third_central += p * d * d * d;
    }
    return mom;
}

struct DriftDiffusion {
    std::vector<std::complex<double>> drift;
    std::vector<std::complex<double>> diffusion;
    double energy = 0.0;
    double variance = 0.0;
};

// Coefficients of the energy-driven diffusion of the amplitudes:
//   drift_m     = (-i E_m - 1/8 sigma^2 (E_m - H)^2) a_m
//   diffusion_m = 1/2 sigma (E_m - H) a_m
// Both vanish componentwise on eigenstates, which are therefore fixed points
// of the noise.
inline DriftDiffusion drift_diffusion(const StateVector& state, std::span<const double> energies,
                                      double sigma) {
    if (state.amplitudes.size() != energies.size())
        throw std::invalid_argument("drift_diffusion: size mismatch");
    if (std::abs(state.norm_squared() - 1.0) > 1e-6)
        throw std::invalid_argument("drift_diffusion: state not normalised");
    auto mom = energy_moments(state, energies);
    DriftDiffusion out;
    out.energy = mom.energy;
    out.variance = mom.variance;
    out.drift.resize(energies.size());
    out.diffusion.resize(energies.size());
    for (std::size_t m = 0; m < energies.size(); ++m) {
        double gap = energies[m] - mom.energy;
        std::complex<double> a = state.amplitudes[m];
        out.drift[m] = std::complex<double>(0.0, -energies[m]) * a -
                       0.125 * sigma * sigma * gap * gap * a;
        out.diffusion[m] = 0.5 * sigma * gap * a;
    }
    return out;
}

// One Euler-Maruyama update a <- a + drift dt + diffusion dW, renormalised if
// configured. The unrenormalised norm defect per step is O(dt).
inline StateVector step(const StateVector& state, double dW, std::span<const double> energies,
                        const IntegratorConfig& config) {
    if (!std::isfinite(dW)) throw std::invalid_argument("step: non-finite noise increment");
    auto dd = drift_diffusion(state, energies, config.sigma);
    StateVector next;
    next.time_stamp = state.time_stamp + config.dt;
    next.amplitudes.resize(state.amplitudes.size());
    for (std::size_t m = 0; m < state.amplitudes.size(); ++m)
        next.amplitudes[m] = state.amplitudes[m] + dd.drift[m] * config.dt + dd.diffusion[m] * dW;
    if (config.renormalise_each_step) {
        double norm = std::sqrt(next.norm_squared());
        if (!(norm > 0.0)) throw std::domain_error("step: state collapsed to zero");
        for (auto& a : next.amplitudes) a /= norm;
    }
    return next;
}

// Integrates the amplitude diffusion along a stored noise path, one step per
// grid interval. Stability of the explicit scheme needs
// 1/8 sigma^2 (E_N - H)^2 dt well below 1; callers choose the truncation and
// grid accordingly.
inline std::vector<StateVector> integrate_with_noise(const StateVector& initial,
                                                     std::span<const double> grid,
                                                     std::span<const double> noise,
                                                     std::span<const double> energies,
                                                     const IntegratorConfig& config) {
    config.validate();
    if (grid.size() != noise.size() || grid.size() < 2)
        throw std::invalid_argument("integrate_with_noise: grid/noise mismatch");
    if (initial.amplitudes.size() != energies.size())
        throw std::invalid_argument("integrate_with_noise: state/energies mismatch");
    std::vector<StateVector> states;
    states.reserve(grid.size());
    states.push_back(initial);
    states.front().time_stamp = grid[0];
    for (std::size_t k = 1; k < grid.size(); ++k) {
        IntegratorConfig local = config;
        local.dt = grid[k] - grid[k - 1];
        if (!(local.dt > 0.0)) throw std::invalid_argument("integrate_with_noise: grid must increase");
        states.push_back(step(states.back(), noise[k] - noise[k - 1], energies, local));
        states.back().time_stamp = grid[k];
    }
    return states;
}

inline std::vector<double> energy_path(std::span<const StateVector> states,
                                       std::span<const double> energies) {
    std::vector<double> h(states.size());
    for (std::size_t k = 0; k < states.size(); ++k)
        h[k] = energy_moments(states[k], energies).energy;
    return h;
}

} // namespace qrelax::sde
