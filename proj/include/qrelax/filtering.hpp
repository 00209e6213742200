#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qrelax/numerics.hpp"
#include "qrelax/rng.hpp"
#include "qrelax/spectrum.hpp"
#include "qrelax/units.hpp"

namespace qrelax::filtering {

using numerics::pi;

// Configuration of one stochastic run: volatility, evaluation grid, seed and
// how the terminal eigenstate is chosen. sigma carries units
// Energy^-1 Time^-1/2; the grid must start at exactly 0 and increase.
struct SdeConfig {
    double sigma = 1.0;
    std::vector<double> time_grid;
    std::uint64_t rng_seed = 0;
    std::optional<int> forced_outcome; // 1-based eigenstate; sampled when absent

    void validate() const {
        if (!(sigma > 0.0)) throw std::invalid_argument("SdeConfig: sigma must be > 0");
        if (time_grid.empty() || time_grid.front() != 0.0)
            throw std::invalid_argument("SdeConfig: time grid must start at 0");
        for (std::size_t k = 1; k < time_grid.size(); ++k)
            if (!(time_grid[k] > time_grid[k - 1]))
                throw std::invalid_argument("SdeConfig: time grid must be strictly increasing");
        if (forced_outcome && *forced_outcome < 1)
            throw std::invalid_argument("SdeConfig: forced outcome must be >= 1");
    }
};

// Draws the terminal eigenstate with probability proportional to the row.
// Entries with zero probability are never returned.
inline int sample_outcome(const spectrum::TransitionRow& row, rng::NormalSampler& stream) {
    double total = row.probability_sum();
    if (!(total > 0.0)) throw std::domain_error("sample_outcome: all-zero probability row");
    double r = stream.uniform01() * total;
    double cum = 0.0;
    int last_positive = 0;
    for (int m = 1; m <= row.truncation(); ++m) {
        double p = row.probs[static_cast<std::size_t>(m - 1)];
        if (p <= 0.0) continue;
        last_positive = m;
        cum += p;
        if (r < cum) return m;
    }
    return last_positive;
}

// Brownian path sampled exactly on the grid via independent normal increments.
inline std::vector<double> sample_brownian(std::span<const double> grid, rng::NormalSampler& stream) {
    std::vector<double> b(grid.size(), 0.0);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        double dt = grid[k] - grid[k - 1];
        if (!(dt > 0.0)) throw std::invalid_argument("sample_brownian: grid must increase");
        b[k] = b[k - 1] + std::sqrt(dt) * stream.next();
    }
    return b;
}

// Conditionally exact dyadic refinement of a stored Brownian path: each level
// inserts midpoints drawn from the Brownian bridge between stored neighbours,
// so refined paths are nested realisations of one noise process.
inline std::pair<std::vector<double>, std::vector<double>>
brownian_bridge_refine(std::span<const double> grid, std::span<const double> values,
                       int levels, rng::NormalSampler& stream) {
    if (grid.size() != values.size() || grid.size() < 2)
        throw std::invalid_argument("brownian_bridge_refine: bad path");
    std::vector<double> t(grid.begin(), grid.end());
    std::vector<double> b(values.begin(), values.end());
    for (int level = 0; level < levels; ++level) {
        std::vector<double> t2, b2;
        t2.reserve(2 * t.size() - 1);
        b2.reserve(2 * t.size() - 1);
        for (std::size_t k = 0; k + 1 < t.size(); ++k) {
            double dt = t[k + 1] - t[k];
            double mid = 0.5 * (b[k] + b[k + 1]) + std::sqrt(0.25 * dt) * stream.next();
            t2.push_back(t[k]);
            b2.push_back(b[k]);
            t2.push_back(0.5 * (t[k] + t[k + 1]));
            b2.push_back(mid);
        }
        t2.push_back(t.back());
        b2.push_back(b.back());
        t = std::move(t2);
        b = std::move(b2);
    }
    return {std::move(t), std::move(b)};
}

// xi_t = sigma t E_j + B_t, the signal observed by the filter.
inline std::vector<double> information_process(double energy_j, double sigma,
                                               std::span<const double> brownian,
                                               std::span<const double> grid) {
    if (brownian.size() != grid.size())
        throw std::invalid_argument("information_process: size mismatch");
    std::vector<double> xi(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        xi[k] = sigma * energy_j * grid[k] + brownian[k];
    return xi;
}

// Log Bayes weights of the posterior given xi at time t:
//   w_m = log pi_m + sigma E_m xi - 1/2 sigma^2 E_m^2 t.
// Kept in log space; exponents grow like sigma^2 E_N^2 t and would overflow
// naive evaluation within a few time units.
inline std::vector<double> log_posterior_weights(double xi, double t, double sigma,
                                                 std::span<const double> priors,
                                                 std::span<const double> energies) {
    if (priors.size() != energies.size())
        throw std::invalid_argument("log_posterior_weights: size mismatch");
    std::vector<double> w(priors.size());
    for (std::size_t m = 0; m < w.size(); ++m) {
        if (priors[m] > 0.0) {
            double se = sigma * energies[m];
            double sq = se * se;
            w[m] = std::log(priors[m]) + se * xi - 0.5 * (sq * t);
        } else {
            w[m] = -std::numeric_limits<double>::infinity();
        }
    }
    return w;
}

inline std::vector<double> posterior(double xi, double t, double sigma,
                                     std::span<const double> priors,
                                     std::span<const double> energies) {
    if (!(t >= 0.0)) throw std::domain_error("posterior: t must be >= 0");
    return numerics::softmax(log_posterior_weights(xi, t, sigma, priors, energies));
}

inline std::vector<double> posterior(double xi, double t, double sigma,
                                     const spectrum::TransitionRow& row,
                                     std::span<const double> energies) {
    return posterior(xi, t, sigma, std::span<const double>(row.probs), energies);
}

inline double energy_expectation(std::span<const double> post, std::span<const double> energies) {
    if (post.size() != energies.size())
        throw std::invalid_argument("energy_expectation: size mismatch");
    double h = 0.0;
    for (std::size_t m = 0; m < post.size(); ++m) h += post[m] * energies[m];
    return h;
}

inline double energy_variance(std::span<const double> post, std::span<const double> energies,
                              double h) {
    double v = 0.0;
    for (std::size_t m = 0; m < post.size(); ++m) {
        double d = energies[m] - h;
        v += post[m] * d * d;
    }
    return v;
}

// Conditioned log weights in terms of the level differences
// omega_mj = E_m - E_j:  w_m = log pi_m + sigma omega B - 1/2 sigma^2 omega^2 t.
// Equivalent to the xi-form after cancelling the common factor of mode j;
// well defined also when pi_j = 0 (forced outcomes).
inline std::vector<double> conditional_log_weights(double energy_j, double brownian, double t,
                                                   double sigma,
                                                   std::span<const double> priors,
                                                   std::span<const double> energies) {
    if (priors.size() != energies.size())
        throw std::invalid_argument("conditional_log_weights: size mismatch");
    std::vector<double> w(priors.size());
    for (std::size_t m = 0; m < w.size(); ++m) {
        if (priors[m] > 0.0) {
            double so = sigma * (energies[m] - energy_j);
            double sq = so * so;
            w[m] = std::log(priors[m]) + so * brownian - 0.5 * (sq * t);
        } else {
            w[m] = -std::numeric_limits<double>::infinity();
        }
    }
    return w;
}

// Energy path conditioned on the outcome j, evaluated pointwise on the grid.
// Converges to E_j when pi_j > 0, and to the retained eigenvalue nearest E_j
// when pi_j = 0.
inline std::vector<double> conditional_energy_path(int j, std::span<const double> brownian,
                                                   std::span<const double> grid, double sigma,
                                                   std::span<const double> priors,
                                                   std::span<const double> energies) {
    if (j < 1 || static_cast<std::size_t>(j) > energies.size())
        throw std::domain_error("conditional_energy_path: j outside basis");
    if (brownian.size() != grid.size())
        throw std::invalid_argument("conditional_energy_path: size mismatch");
    double e_j = energies[static_cast<std::size_t>(j - 1)];
    std::vector<double> h(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        auto p = numerics::softmax(conditional_log_weights(e_j, brownian[k], grid[k], sigma,
                                                           priors, energies));
        h[k] = energy_expectation(p, energies);
    }
    return h;
}

// Energy variance along the conditioned path. Nonnegative, vanishes as the
// state reduces.
inline std::vector<double> variance_path(int j, std::span<const double> brownian,
                                         std::span<const double> grid, double sigma,
                                         std::span<const double> priors,
                                         std::span<const double> energies) {
    if (j < 1 || static_cast<std::size_t>(j) > energies.size())
        throw std::domain_error("variance_path: j outside basis");
    double e_j = energies[static_cast<std::size_t>(j - 1)];
    std::vector<double> v(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        auto p = numerics::softmax(conditional_log_weights(e_j, brownian[k], grid[k], sigma,
                                                           priors, energies));
        double h = energy_expectation(p, energies);
        v[k] = energy_variance(p, energies, h);
    }
    return v;
}

// W_t = xi_t - sigma int_0^t H ds, the Brownian motion seen by the observer.
// The integral is trapezoidal on the stored grid.
inline std::vector<double> innovations_path(std::span<const double> xi,
                                            std::span<const double> energy,
                                            double sigma, std::span<const double> grid) {
    if (xi.size() != grid.size() || energy.size() != grid.size())
        throw std::invalid_argument("innovations_path: size mismatch");
    auto integral = numerics::cumulative_trapezoid(grid, energy);
    std::vector<double> w(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) w[k] = xi[k] - sigma * integral[k];
    return w;
}

// Complex amplitudes over the truncated post-expansion eigenbasis.
struct StateVector {
    std::vector<std::complex<double>> amplitudes;
    double time_stamp = 0.0;

    double norm_squared() const {
        double s = 0.0;
        for (const auto& a : amplitudes) s += std::norm(a);
        return s;
    }
};

// Log moduli of the wave-function amplitudes:
//   log |a_m| (unnormalised) = 1/2 log pi_m + 1/2 sigma E_m xi - 1/4 sigma^2 E_m^2 t.
// The expression mirrors the posterior weights term by term at half scale, so
// the squared moduli reproduce the posterior probabilities to rounding.
inline std::vector<double> log_amplitude_moduli(double xi, double t, double sigma,
                                                std::span<const double> priors,
                                                std::span<const double> energies) {
    if (priors.size() != energies.size())
        throw std::invalid_argument("log_amplitude_moduli: size mismatch");
    std::vector<double> h(priors.size());
    for (std::size_t m = 0; m < h.size(); ++m) {
        if (priors[m] > 0.0) {
            double se = sigma * energies[m];
            double sq = se * se;
            h[m] = 0.5 * std::log(priors[m]) + 0.5 * (se * xi) - 0.25 * (sq * t);
        } else {
            h[m] = -std::numeric_limits<double>::infinity();
        }
    }
    return h;
}

// Normalised wave function at time t on the path conditioned on outcome j.
// The amplitude phases are exp(-i E_m t); the signs of the initial overlaps
// are taken from the row so the t = 0 state reconstructs the pre-expansion
// eigenfunction pointwise.
inline StateVector wavefunction(int j, double brownian, double t, double sigma,
                                const spectrum::TransitionRow& row,
                                std::span<const double> energies) {
    if (j < 1 || static_cast<std::size_t>(j) > energies.size())
        throw std::domain_error("wavefunction: j outside basis");
    double e_j = energies[static_cast<std::size_t>(j - 1)];
    double xi = sigma * e_j * t + brownian;
    auto lm = log_amplitude_moduli(xi, t, sigma, row.probs, energies);
    double lmax = -std::numeric_limits<double>::infinity();
    for (double x : lm) lmax = std::max(lmax, x);
    if (!(lmax > -std::numeric_limits<double>::infinity()))
        throw std::domain_error("wavefunction: all-zero probability row");
    std::vector<double> moduli(lm.size());
    double norm2 = 0.0;
    for (std::size_t m = 0; m < lm.size(); ++m) {
        moduli[m] = std::exp(lm[m] - lmax);
        norm2 += moduli[m] * moduli[m];
    }
    double inv_norm = 1.0 / std::sqrt(norm2);
    StateVector state;
    state.time_stamp = t;
    state.amplitudes.resize(lm.size());
    for (std::size_t m = 0; m < lm.size(); ++m) {
        double mag = moduli[m] * inv_norm;
        if (row.amplitudes[m] < 0.0) mag = -mag;
        double phase = -energies[m] * t;
        state.amplitudes[m] = mag * std::complex<double>(std::cos(phase), std::sin(phase));
    }
    return state;
}

// Initial state of the expanded well: normalised signed overlaps, t = 0.
inline StateVector initial_state(const spectrum::TransitionRow& row) {
    StateVector state;
    state.time_stamp = 0.0;
    state.amplitudes.resize(row.amplitudes.size());
    double norm2 = 0.0;
    for (double c : row.amplitudes) norm2 += c * c;
    if (!(norm2 > 0.0)) throw std::domain_error("initial_state: all-zero row");
    double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t m = 0; m < row.amplitudes.size(); ++m)
        state.amplitudes[m] = std::complex<double>(row.amplitudes[m] * inv, 0.0);
    return state;
}

// Position density on a grid over [0, alpha L].
struct DensitySnapshot {
    std::vector<double> x_grid;
    std::vector<double> values;
    double time_stamp = 0.0;

    double integral() const { return numerics::trapezoid(x_grid, values); }
};

// rho(x) = |sum_m a_m chi_m(x)|^2, accumulated as separate cosine and sine
// (real and imaginary) sums whose squares are added.
inline DensitySnapshot density(const StateVector& state, std::span<const double> x_grid,
                               double expanded_width) {
    DensitySnapshot snap;
    snap.time_stamp = state.time_stamp;
    snap.x_grid.assign(x_grid.begin(), x_grid.end());
    snap.values.resize(x_grid.size());
    const int n_modes = static_cast<int>(state.amplitudes.size());
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        double re = 0.0, im = 0.0;
        for (int m = 1; m <= n_modes; ++m) {
            double chi = spectrum::eigenfunction_value(m, x_grid[i], expanded_width);
            re += state.amplitudes[static_cast<std::size_t>(m - 1)].real() * chi;
            im += state.amplitudes[static_cast<std::size_t>(m - 1)].imag() * chi;
        }
        snap.values[i] = re * re + im * im;
    }
    return snap;
}

// One realisation of the filtered dynamics, evaluated exactly on the grid.
struct FilteredTrajectory {
    double sigma = 1.0;
    std::vector<double> grid;
    int outcome = 1; // 1-based eigenstate the run is conditioned on
    std::vector<double> brownian;
    std::vector<double> information;            // xi
    std::vector<std::vector<double>> posterior; // [time][mode]
    std::vector<double> energy;                 // H
    std::vector<double> variance;               // V
    std::vector<double> innovations;            // W

    int terminal_mode() const {
        const auto& last = posterior.back();
        std::size_t best = 0;
        for (std::size_t m = 1; m < last.size(); ++m)
            if (last[m] > last[best]) best = m;
        return static_cast<int>(best) + 1;
    }
};

// Builds a trajectory from its own deterministic RNG stream. The outcome
// uniform is consumed first, then the Brownian increments, so conditioned and
// sampled runs with equal seeds share no draws by accident.
inline FilteredTrajectory simulate_trajectory(const spectrum::TransitionRow& row,
                                              std::span<const double> energies,
                                              const SdeConfig& config,
                                              std::uint64_t stream_index) {
    config.validate();
    if (static_cast<int>(energies.size()) != row.truncation())
        throw std::invalid_argument("simulate_trajectory: row/energies mismatch");
    auto stream = rng::make_normal_stream(config.rng_seed, stream_index);

    FilteredTrajectory traj;
    traj.sigma = config.sigma;
    traj.grid = config.time_grid;
    if (config.forced_outcome) {
        if (*config.forced_outcome > row.truncation())
            throw std::invalid_argument("simulate_trajectory: forced outcome outside basis");
        traj.outcome = *config.forced_outcome;
    } else {
        traj.outcome = sample_outcome(row, stream);
    }

    traj.brownian = sample_brownian(traj.grid, stream);
    double e_j = energies[static_cast<std::size_t>(traj.outcome - 1)];
    traj.information = information_process(e_j, config.sigma, traj.brownian, traj.grid);

    const std::size_t n_times = traj.grid.size();
    traj.posterior.resize(n_times);
    traj.energy.resize(n_times);
    traj.variance.resize(n_times);
    for (std::size_t k = 0; k < n_times; ++k) {
        traj.posterior[k] = posterior(traj.information[k], traj.grid[k], config.sigma,
                                      row.probs, energies);
        traj.energy[k] = energy_expectation(traj.posterior[k], energies);
        traj.variance[k] = energy_variance(traj.posterior[k], energies, traj.energy[k]);
    }
    traj.innovations = innovations_path(traj.information, traj.energy, config.sigma, traj.grid);
    return traj;
}

} // namespace qrelax::filtering
