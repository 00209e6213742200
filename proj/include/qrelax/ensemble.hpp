#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "qrelax/filtering.hpp"
#include "qrelax/numerics.hpp"
#include "qrelax/relaxation.hpp"
#include "qrelax/spectrum.hpp"
#include "qrelax/units.hpp"

namespace qrelax::ensemble {

enum class RunMode { sampled, conditioned };

struct EnsembleConfig {
    WellModel well;
    int initial_state = 1; // pre-expansion eigenstate n
    double sigma = 1.0;
    RunMode mode = RunMode::sampled;
    int conditioned_outcome = 1; // terminal j in conditioned mode; pi_j = 0 allowed
    int run_count = 1000;
    std::uint64_t seed = 0;
    std::size_t checkpoint_count = 64;
    double horizon_override = 0.0;  // end time; 0 derives 10 tau_R from the mode
    std::size_t density_points = 0; // grid size for the mean density surface; 0 = off
    int threads = 0;                // 0 = hardware concurrency

    void validate() const {
        well.validate();
        if (initial_state < 1) throw std::invalid_argument("EnsembleConfig: initial state must be >= 1");
        if (!(sigma > 0.0)) throw std::invalid_argument("EnsembleConfig: sigma must be > 0");
        if (run_count < 1) throw std::invalid_argument("EnsembleConfig: run count must be >= 1");
        if (checkpoint_count < 2) throw std::invalid_argument("EnsembleConfig: need >= 2 checkpoints");
        if (conditioned_outcome < 1 || conditioned_outcome > well.truncation)
            throw std::invalid_argument("EnsembleConfig: conditioned outcome outside basis");
        if (horizon_override < 0.0) throw std::invalid_argument("EnsembleConfig: horizon must be >= 0");
        if (threads < 0) throw std::invalid_argument("EnsembleConfig: threads must be >= 0");
    }
};

// {0} followed by checkpoints geometrically spaced over [horizon/1000, horizon];
// relaxation is a log-scale phenomenon.
inline std::vector<double> make_checkpoints(double horizon, std::size_t count) {
    if (!(horizon > 0.0)) throw std::invalid_argument("make_checkpoints: horizon must be > 0");
    auto geo = numerics::geomspace(horizon / 1000.0, horizon, count);
    std::vector<double> out;
    out.reserve(count + 1);
    out.push_back(0.0);
    out.insert(out.end(), geo.begin(), geo.end());
    return out;
}

inline double default_horizon(const EnsembleConfig& config) {
    if (config.horizon_override > 0.0) return config.horizon_override;
    int j_ref = config.mode == RunMode::conditioned ? config.conditioned_outcome : 1;
    double tau = relaxation::tau_relax(config.well.expansion, j_ref, config.sigma, 10.0);
    if (!(tau > 0.0)) tau = 0.1 / (config.sigma * config.sigma); // alpha = 1: static row
    return 10.0 * tau;
}

struct EnsembleSummary {
    EnsembleConfig config;
    std::vector<double> checkpoints;
    std::vector<double> mean_energy;
    std::vector<double> se_energy;
    std::vector<double> mean_variance;
    std::vector<double> se_variance;
    std::vector<long> terminal_count;        // per eigenstate, 1-based shifted
    std::vector<double> terminal_frequency;
    std::vector<double> x_grid;                      // empty when density is off
    std::vector<std::vector<double>> mean_density;   // [checkpoint][x]
};

namespace detail {

constexpr std::size_t block_size = 64;

struct BlockAccumulator {
    std::vector<double> sum_h, sum_h2, sum_v, sum_v2;
    std::vector<long> terminal;
    std::vector<numerics::KahanSum> density; // checkpoint-major

    BlockAccumulator(std::size_t n_checkpoints, std::size_t n_modes, std::size_t n_x)
        : sum_h(n_checkpoints, 0.0), sum_h2(n_checkpoints, 0.0), sum_v(n_checkpoints, 0.0),
          sum_v2(n_checkpoints, 0.0), terminal(n_modes, 0), density(n_checkpoints * n_x) {}
};

} // namespace detail

// Runs `config.run_count` independent trajectories and reduces them into the
// summary. Work is split into fixed blocks processed by any number of
// threads; block-internal accumulation is sequential and blocks are reduced
// in index order, so results are bit-identical for every thread count.
inline EnsembleSummary run_ensemble_with_row(const EnsembleConfig& config,
                                             const spectrum::TransitionRow& row,
                                             std::span<const double> energies) {
    config.validate();
    if (static_cast<int>(energies.size()) != row.truncation())
        throw std::invalid_argument("run_ensemble: row/energies mismatch");

    EnsembleSummary summary;
    summary.config = config;
    summary.checkpoints = make_checkpoints(default_horizon(config), config.checkpoint_count);

    const std::size_t n_checkpoints = summary.checkpoints.size();
    const std::size_t n_modes = energies.size();
    const std::size_t n_x = config.density_points;
    if (n_x > 0)
        summary.x_grid = numerics::linspace(0.0, config.well.expansion * config.well.width,
                                            n_x);

    // chi[m][i]: eigenfunctions of the expanded well tabulated on the grid.
    std::vector<double> basis;
    if (n_x > 0) {
        basis.resize(n_modes * n_x);
        double expanded = config.well.expansion * config.well.width;
        for (std::size_t m = 0; m < n_modes; ++m)
            for (std::size_t i = 0; i < n_x; ++i)
                basis[m * n_x + i] = spectrum::eigenfunction_value(static_cast<int>(m) + 1,
                                                                   summary.x_grid[i], expanded);
    }

    filtering::SdeConfig traj_config;
    traj_config.sigma = config.sigma;
    traj_config.time_grid = summary.checkpoints;
    traj_config.rng_seed = config.seed;
    if (config.mode == RunMode::conditioned) traj_config.forced_outcome = config.conditioned_outcome;

    const std::size_t n_runs = static_cast<std::size_t>(config.run_count);
    const std::size_t n_blocks = (n_runs + detail::block_size - 1) / detail::block_size;
    std::vector<detail::BlockAccumulator> blocks(
        n_blocks, detail::BlockAccumulator(n_checkpoints, n_modes, n_x));

    auto process_block = [&](std::size_t block_index) {
        auto& acc = blocks[block_index];
        std::size_t begin = block_index * detail::block_size;
        std::size_t end = std::min(begin + detail::block_size, n_runs);
        std::vector<double> re(n_x), im(n_x);
        for (std::size_t run = begin; run < end; ++run) {
            auto traj = filtering::simulate_trajectory(row, energies, traj_config, run);
            for (std::size_t k = 0; k < n_checkpoints; ++k) {
                acc.sum_h[k] += traj.energy[k];
                acc.sum_h2[k] += traj.energy[k] * traj.energy[k];
                acc.sum_v[k] += traj.variance[k];
                acc.sum_v2[k] += traj.variance[k] * traj.variance[k];
            }
            acc.terminal[static_cast<std::size_t>(traj.terminal_mode() - 1)] += 1;
            if (n_x > 0) {
                for (std::size_t k = 0; k < n_checkpoints; ++k) {
                    // rho(x) = (sum_m |a_m| cos th_m chi_m)^2 + (sin part)^2 with
                    // |a_m| = sqrt(P_m), th_m = -E_m t.
                    std::fill(re.begin(), re.end(), 0.0);
                    std::fill(im.begin(), im.end(), 0.0);
                    double t = summary.checkpoints[k];
                    for (std::size_t m = 0; m < n_modes; ++m) {
                        double p = traj.posterior[k][m];
                        if (p <= 0.0) continue;
                        double mag = std::sqrt(p);
                        if (row.amplitudes[m] < 0.0) mag = -mag;
                        double cr = mag * std::cos(energies[m] * t);
                        double ci = -mag * std::sin(energies[m] * t);
                        const double* chi = &basis[m * n_x];
                        for (std::size_t i = 0; i < n_x; ++i) {
                            re[i] += cr * chi[i];
                            im[i] += ci * chi[i];
                        }
                    }
                    for (std::size_t i = 0; i < n_x; ++i)
                        acc.density[k * n_x + i].add(re[i] * re[i] + im[i] * im[i]);
                }
            }
        }
    };

    unsigned hw = std::thread::hardware_concurrency();
    std::size_t n_threads = config.threads > 0 ? static_cast<std::size_t>(config.threads)
                                               : std::max(1u, hw);
    n_threads = std::min(n_threads, n_blocks);
    if (n_threads <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) process_block(b);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t w = 0; w < n_threads; ++w)
            pool.emplace_back([&] {
                for (std::size_t b = next.fetch_add(1); b < n_blocks; b = next.fetch_add(1))
                    process_block(b);
            });
        for (auto& th : pool) th.join();
    }

    // In-order reduction over blocks.
    std::vector<double> sum_h(n_checkpoints, 0.0), sum_h2(n_checkpoints, 0.0);
    std::vector<double> sum_v(n_checkpoints, 0.0), sum_v2(n_checkpoints, 0.0);
    summary.terminal_count.assign(n_modes, 0);
    std::vector<numerics::KahanSum> density(n_checkpoints * n_x);
    for (const auto& acc : blocks) {
        for (std::size_t k = 0; k < n_checkpoints; ++k) {
            sum_h[k] += acc.sum_h[k];
            sum_h2[k] += acc.sum_h2[k];
            sum_v[k] += acc.sum_v[k];
            sum_v2[k] += acc.sum_v2[k];
        }
        for (std::size_t m = 0; m < n_modes; ++m) summary.terminal_count[m] += acc.terminal[m];
        for (std::size_t i = 0; i < density.size(); ++i) density[i].add(acc.density[i].value());
    }

    auto finalise = [&](const std::vector<double>& s, const std::vector<double>& s2,
                        std::vector<double>& mean, std::vector<double>& se) {
        mean.resize(n_checkpoints);
        se.resize(n_checkpoints);
        double m_runs = static_cast<double>(n_runs);
        for (std::size_t k = 0; k < n_checkpoints; ++k) {
            mean[k] = s[k] / m_runs;
            if (n_runs > 1) {
                double var = (s2[k] - s[k] * s[k] / m_runs) / (m_runs - 1.0);
                se[k] = std::sqrt(std::max(var, 0.0) / m_runs);
            } else {
                se[k] = 0.0;
            }
        }
    };
    finalise(sum_h, sum_h2, summary.mean_energy, summary.se_energy);
    finalise(sum_v, sum_v2, summary.mean_variance, summary.se_variance);

    summary.terminal_frequency.resize(n_modes);
    for (std::size_t m = 0; m < n_modes; ++m)
        summary.terminal_frequency[m] =
            static_cast<double>(summary.terminal_count[m]) / static_cast<double>(n_runs);

    if (n_x > 0) {
        summary.mean_density.assign(n_checkpoints, std::vector<double>(n_x, 0.0));
        for (std::size_t k = 0; k < n_checkpoints; ++k)
            for (std::size_t i = 0; i < n_x; ++i)
                summary.mean_density[k][i] = density[k * n_x + i].value() /
                                             static_cast<double>(n_runs);
    }
    return summary;
}

inline EnsembleSummary run_ensemble(const EnsembleConfig& config) {
    config.validate();
    auto row = spectrum::make_transition_row(config.well, config.initial_state);
    auto energies = spectrum::post_expansion_energies(config.well);
    return run_ensemble_with_row(config, row, energies);
}

struct FrequencyReport {
    std::vector<double> z_scores;   // per eigenstate; 0 where expected = observed = 0
    double chi_square = 0.0;
    int chi_square_dof = 0;
    double max_abs_z = 0.0;
    bool zero_prob_respected = true; // no counts landed on zero-probability modes
};

// Observed terminal frequencies against the transition row. Expected
// frequencies use the row normalised over the truncation, which is what the
// sampler draws from.
inline FrequencyReport terminal_frequency_test(const EnsembleSummary& summary,
                                               const spectrum::TransitionRow& row) {
    if (summary.config.mode != RunMode::sampled)
        throw std::invalid_argument("terminal_frequency_test: needs a sampled-outcome ensemble");
    if (static_cast<std::size_t>(row.truncation()) != summary.terminal_frequency.size())
        throw std::invalid_argument("terminal_frequency_test: row mismatch");
    FrequencyReport report;
    double total = row.probability_sum();
    double m_runs = static_cast<double>(summary.config.run_count);
    report.z_scores.resize(summary.terminal_frequency.size(), 0.0);
    for (std::size_t m = 0; m < report.z_scores.size(); ++m) {
        double p = row.probs[m] / total;
        double observed = summary.terminal_frequency[m];
        if (p <= 0.0) {
            if (summary.terminal_count[m] != 0) {
                report.zero_prob_respected = false;
                report.z_scores[m] = std::numeric_limits<double>::infinity();
            }
            continue;
        }
        double se = std::sqrt(p * (1.0 - p) / m_runs);
        report.z_scores[m] = se > 0.0 ? (observed - p) / se : 0.0;
        report.max_abs_z = std::max(report.max_abs_z, std::abs(report.z_scores[m]));
        double expected = m_runs * p;
        if (expected >= 5.0) {
            double d = static_cast<double>(summary.terminal_count[m]) - expected;
            report.chi_square += d * d / expected;
            ++report.chi_square_dof;
        }
    }
    report.chi_square_dof = std::max(report.chi_square_dof - 1, 1);
    return report;
}

struct MartingaleReport {
    std::vector<double> z_scores; // per checkpoint, against the reference level
    double max_abs_z = 0.0;
    bool pass = false;
};

// The unconditioned energy process conserves its mean; each checkpoint mean
// must sit within 3 standard errors of the initial expected energy. The t = 0
// anchor is skipped: its ensemble mean is deterministic (zero standard error)
// and pinned at the truncated row's expectation.
inline MartingaleReport martingale_test(const EnsembleSummary& summary, double reference_energy,
                                        double z_limit = 3.0) {
    if (summary.config.mode != RunMode::sampled)
        throw std::invalid_argument("martingale_test: conditioned runs do not conserve energy");
    MartingaleReport report;
    report.z_scores.resize(summary.checkpoints.size(), 0.0);
    for (std::size_t k = 0; k < summary.checkpoints.size(); ++k) {
        if (summary.checkpoints[k] == 0.0) continue;
        double diff = summary.mean_energy[k] - reference_energy;
        double se = summary.se_energy[k];
        if (diff == 0.0)
            report.z_scores[k] = 0.0;
        else if (se > 0.0)
            report.z_scores[k] = diff / se;
        else
            report.z_scores[k] = std::numeric_limits<double>::infinity();
        report.max_abs_z = std::max(report.max_abs_z, std::abs(report.z_scores[k]));
    }
    report.pass = report.max_abs_z < z_limit;
    return report;
}

struct SupermartingaleReport {
    int violations = 0;     // steps increasing beyond the slack
    double worst_excess = 0.0;
    bool pass = false;
};

// Ensemble mean of the variance must be non-increasing between consecutive
// checkpoints, within one standard error of slack per step. A nonzero
// relative_floor additionally ignores steps where both means have decayed
// below that fraction of the initial variance; in the relaxed tail the mean
// difference is carried by one or two wobbling paths and its sign is a coin
// flip.
inline SupermartingaleReport supermartingale_test(const EnsembleSummary& summary,
                                                  double se_slack = 1.0,
                                                  double relative_floor = 0.0) {
    if (summary.config.mode != RunMode::sampled)
        throw std::invalid_argument("supermartingale_test: needs a sampled-outcome ensemble");
    SupermartingaleReport report;
    double floor = relative_floor * summary.mean_variance.front();
    for (std::size_t k = 1; k < summary.checkpoints.size(); ++k) {
        if (summary.mean_variance[k] < floor && summary.mean_variance[k - 1] < floor) continue;
        double rise = summary.mean_variance[k] - summary.mean_variance[k - 1];
        double slack = se_slack * summary.se_variance[k];
        if (rise > slack) {
            ++report.violations;
            report.worst_excess = std::max(report.worst_excess, rise - slack);
        }
    }
    report.pass = report.violations == 0;
    return report;
}

} // namespace qrelax::ensemble
