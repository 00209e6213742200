#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "qrelax/filtering.hpp"
#include "qrelax/numerics.hpp"
#include "qrelax/rng.hpp"
#include "qrelax/spectrum.hpp"

namespace qrelax::adiabatic {

using numerics::pi;

// Slowly expanding well. The built-in schedule is L(t) = L0 (1 + v t); a
// custom schedule may be supplied, in which case width rates fall back to
// central differences.
struct TimeDependentWell {
    double initial_width = 1.0; // L0
    double rate = 0.0;          // v, relative expansion speed, >= 0
    int truncation = 8;
    std::function<double(double)> custom_schedule; // L(t), overrides the linear law

    void validate() const {
        if (!(initial_width > 0.0)) throw std::invalid_argument("TimeDependentWell: width must be > 0");
        if (rate < 0.0) throw std::invalid_argument("TimeDependentWell: rate must be >= 0");
        if (truncation < 2) throw std::invalid_argument("TimeDependentWell: truncation must be >= 2");
    }

    double width(double t) const {
        double L = custom_schedule ? custom_schedule(t) : initial_width * (1.0 + rate * t);
        if (!(L > 0.0)) throw std::domain_error("TimeDependentWell: width not positive on horizon");
        return L;
    }

    // dL/dt: analytic for the linear schedule, central difference with step
    // h for custom ones.
    double width_rate(double t, double h) const {
        if (!custom_schedule) return initial_width * rate;
        if (!(h > 0.0)) throw std::invalid_argument("TimeDependentWell: need positive step for custom schedule");
        return (custom_schedule(t + h) - custom_schedule(t - h)) / (2.0 * h);
    }
};

// E_k(t) = pi^2 k^2 / L(t)^2 in units of the (initial-width) characteristic
// energy, with L0 = 1 setting the scale.
inline std::vector<double> instantaneous_spectrum(double t, const TimeDependentWell& well) {
    well.validate();
    double L = well.width(t) / well.initial_width;
    std::vector<double> e(static_cast<std::size_t>(well.truncation));
    for (int k = 1; k <= well.truncation; ++k)
        e[static_cast<std::size_t>(k - 1)] = pi * pi * static_cast<double>(k) *
                                             static_cast<double>(k) / (L * L);
    return e;
}

// dE_k/dt = -2 E_k L'/L.
inline std::vector<double> instantaneous_energy_rates(double t, const TimeDependentWell& well,
                                                      double diff_step) {
    auto e = instantaneous_spectrum(t, well);
    double L = well.width(t);
    double Ldot = well.width_rate(t, diff_step);
    for (double& x : e) x *= -2.0 * Ldot / L;
    return e;
}

inline double occupation_mean(std::span<const double> occupation, std::span<const double> values) {
    if (occupation.size() != values.size())
        throw std::invalid_argument("occupation_mean: size mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) s += occupation[k] * values[k];
    return s;
}

inline double occupation_variance(std::span<const double> occupation,
                                  std::span<const double> values, double mean) {
    double v = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        double d = values[k] - mean;
        v += occupation[k] * d * d;
    }
    return v;
}

// One Euler-Maruyama update of the occupation process,
//   dPi^k = sigma (E_k(t) - H_t) Pi^k dW,  H_t = sum E_k Pi^k.
// Negative excursions are clamped to zero (counted) and the vector is
// renormalised; the continuum process is nonnegative and conserves the sum.
inline std::vector<double> pi_step(std::span<const double> occupation, double dW, double dt,
                                   std::span<const double> energies, double sigma,
                                   long* clamp_events = nullptr) {
    (void)dt; // the drift-free update uses only dW; kept for call-site symmetry
    if (occupation.size() != energies.size())
        throw std::invalid_argument("pi_step: size mismatch");
    double h = occupation_mean(occupation, energies);
    std::vector<double> next(occupation.size());
    double total = 0.0;
    for (std::size_t k = 0; k < next.size(); ++k) {
        double x = occupation[k] * (1.0 + sigma * (energies[k] - h) * dW);
        if (x < 0.0) {
            x = 0.0;
            if (clamp_events) ++(*clamp_events);
        }
        next[k] = x;
        total += x;
    }
    if (!(total > 0.0)) throw std::domain_error("pi_step: occupation collapsed to zero");
    for (double& x : next) x /= total;
    return next;
}

enum class ConditionState { holds, fails, reduced };

struct SupermartingaleCheck {
    double lhs = 0.0; // dispersion rate ratio  DeltaHdot / DeltaH
    double rhs = 0.0; // 1/2 sigma^2 DeltaH^2
    ConditionState state = ConditionState::reduced;

    bool holds() const { return state != ConditionState::fails; }
};

// Sufficient condition for the variance process to keep decreasing on
// average while the spectrum drifts: DeltaHdot / DeltaH < 1/2 sigma^2 DeltaH^2.
// States with vanishing variance are reported as reduced, not as holding.
inline SupermartingaleCheck supermartingale_condition(std::span<const double> occupation,
                                                      std::span<const double> energies,
                                                      std::span<const double> energy_rates,
                                                      double sigma) {
    double h = occupation_mean(occupation, energies);
    double v = occupation_variance(occupation, energies, h);
    SupermartingaleCheck out;
    constexpr double v_floor = 1e-14;
    if (v <= v_floor) {
        out.state = ConditionState::reduced;
        return out;
    }
    double hdot = occupation_mean(occupation, energy_rates);
    double vdot = occupation_variance(occupation, energy_rates, hdot);
    double dh = std::sqrt(v);
    out.lhs = std::sqrt(std::max(vdot, 0.0)) / dh;
    out.rhs = 0.5 * sigma * sigma * v;
    out.state = out.lhs < out.rhs ? ConditionState::holds : ConditionState::fails;
    return out;
}

// dH = Hdot dt + sigma V dW with Hdot estimated from the spectra at the two
// ends of the step.
inline double drifted_energy_increment(std::span<const double> occupation,
                                       std::span<const double> energies_now,
                                       std::span<const double> energies_next, double dt,
                                       double sigma, double dW) {
    if (!(dt > 0.0)) throw std::invalid_argument("drifted_energy_increment: dt must be > 0");
    double h = occupation_mean(occupation, energies_now);
    double v = occupation_variance(occupation, energies_now, h);
    double hdot = 0.0;
    for (std::size_t k = 0; k < occupation.size(); ++k)
        hdot += occupation[k] * (energies_next[k] - energies_now[k]) / dt;
    return hdot * dt + sigma * v * dW;
}

// Extra drift of the variance process from the moving spectrum,
// 2 Cov(H, dH/dt) = 2 (sum Pi E Edot - H Hdot).
inline double variance_covariance_drift(std::span<const double> occupation,
                                        std::span<const double> energies,
                                        std::span<const double> energy_rates) {
    double h = occupation_mean(occupation, energies);
    double hdot = occupation_mean(occupation, energy_rates);
    double cross = 0.0;
    for (std::size_t k = 0; k < occupation.size(); ++k)
        cross += occupation[k] * energies[k] * energy_rates[k];
    return 2.0 * (cross - h * hdot);
}

// Correlation between the Hamiltonian and its time derivative in the current
// occupation; lies in [-1, 1] by Cauchy-Schwarz.
inline double energy_rate_correlation(std::span<const double> occupation,
                                      std::span<const double> energies,
                                      std::span<const double> energy_rates) {
    double h = occupation_mean(occupation, energies);
    double hdot = occupation_mean(occupation, energy_rates);
    double v = occupation_variance(occupation, energies, h);
    double vdot = occupation_variance(occupation, energy_rates, hdot);
    if (v <= 0.0 || vdot <= 0.0) return 0.0;
    double cov = 0.0;
    for (std::size_t k = 0; k < occupation.size(); ++k)
        cov += occupation[k] * (energies[k] - h) * (energy_rates[k] - hdot);
    return cov / std::sqrt(v * vdot);
}

struct PiProcessPath {
    std::vector<double> times;
    std::vector<std::vector<double>> occupation; // [time][mode]
    std::vector<double> width;
    std::vector<double> energy;
    std::vector<double> variance;
    std::vector<double> condition_lhs;
    std::vector<double> condition_rhs;
    std::vector<ConditionState> condition;
    long clamp_events = 0;
};

// Euler-Maruyama realisation of the occupation process on [0, horizon],
// recorded every `record_stride` steps (and at both ends).
inline PiProcessPath simulate_pi_process(const TimeDependentWell& well,
                                         std::span<const double> initial_occupation,
                                         double sigma, double dt, double horizon,
                                         std::uint64_t seed, std::uint64_t stream_index,
                                         std::size_t record_stride = 1) {
    well.validate();
    if (!(dt > 0.0) || !(horizon > 0.0))
        throw std::invalid_argument("simulate_pi_process: need positive dt and horizon");
    if (static_cast<int>(initial_occupation.size()) != well.truncation)
        throw std::invalid_argument("simulate_pi_process: occupation/truncation mismatch");
    if (record_stride == 0) record_stride = 1;

    auto stream = rng::make_normal_stream(seed, stream_index);
    std::vector<double> occ(initial_occupation.begin(), initial_occupation.end());
    auto n_steps = static_cast<std::size_t>(std::ceil(horizon / dt));

    PiProcessPath path;
    auto record = [&](double t) {
        auto e = instantaneous_spectrum(t, well);
        auto edot = instantaneous_energy_rates(t, well, dt / 10.0);
        double h = occupation_mean(occ, e);
        auto check = supermartingale_condition(occ, e, edot, sigma);
        path.times.push_back(t);
        path.occupation.push_back(occ);
        path.width.push_back(well.width(t));
        path.energy.push_back(h);
        path.variance.push_back(occupation_variance(occ, e, h));
        path.condition_lhs.push_back(check.lhs);
        path.condition_rhs.push_back(check.rhs);
        path.condition.push_back(check.state);
    };

    record(0.0);
    for (std::size_t step_idx = 1; step_idx <= n_steps; ++step_idx) {
        double t_prev = dt * static_cast<double>(step_idx - 1);
        double t_now = std::min(dt * static_cast<double>(step_idx), horizon);
        double step_dt = t_now - t_prev;
        if (!(step_dt > 0.0)) break;
        auto e = instantaneous_spectrum(t_prev, well);
        double dW = std::sqrt(step_dt) * stream.next();
        occ = pi_step(occ, dW, step_dt, e, sigma, &path.clamp_events);
        if (step_idx % record_stride == 0 || step_idx == n_steps) record(t_now);
    }
    return path;
}

// Probability of ending in the ground state when a total expansion to
// 1 + eps_total is applied as `stages` equal sudden quenches, each followed
// by full relaxation. The stage count stands in for the inverse expansion
// speed: more, smaller quenches approximate the slow (adiabatic) limit.
inline double staged_expansion_ground_probability(double eps_total, int stages, int runs,
                                                  std::uint64_t seed, int truncation = 30) {
    if (!(eps_total > 0.0)) throw std::invalid_argument("staged expansion: eps must be > 0");
    if (stages < 1 || runs < 1) throw std::invalid_argument("staged expansion: bad counts");
    double factor = std::pow(1.0 + eps_total, 1.0 / static_cast<double>(stages));
    long hits = 0;
    for (int r = 0; r < runs; ++r) {
        auto stream = rng::make_normal_stream(seed, static_cast<std::uint64_t>(r));
        int state = 1;
        for (int s = 0; s < stages; ++s) {
            auto row = spectrum::make_transition_row(state, factor, truncation);
            state = filtering::sample_outcome(row, stream);
        }
        if (state == 1) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(runs);
}

} // namespace qrelax::adiabatic
