#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "qrelax/filtering.hpp"
#include "qrelax/numerics.hpp"

namespace qrelax::relaxation {

using numerics::pi;

inline double normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }

// Inverse of the standard normal distribution function: Acklam's rational
// approximation polished with one Halley step, good to machine precision.
inline double normal_quantile(double p) {
    if (!(p > 0.0) || !(p < 1.0))
        throw std::domain_error("normal_quantile: p must lie in (0,1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double e = normal_cdf(x) - p;
    double u = e * std::sqrt(2.0 * pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

// log M_mj at (B_t, t): the exponent sigma omega B - 1/2 sigma^2 omega^2 t of
// the factor suppressing a competing mode with level difference omega.
inline double log_decay_factor(double brownian, double t, double sigma, double omega) {
    double so = sigma * omega;
    return so * brownian - 0.5 * (so * so) * t;
}

// P(M < e^-lambda) = N( 1/2 sigma |omega| sqrt(t) - lambda / (sigma |omega| sqrt(t)) ).
// The sign of omega drops out by the reflection symmetry of the normal law.
inline double prob_decay(double lambda, double t, double sigma, double omega) {
    if (omega == 0.0) throw std::domain_error("prob_decay: omega must be nonzero (same level)");
    if (!(t > 0.0)) throw std::domain_error("prob_decay: t must be > 0");
    double s = sigma * std::abs(omega) * std::sqrt(t);
    return normal_cdf(0.5 * s - lambda / s);
}

// Smallest t with prob_decay(lambda, t, sigma, omega) = p:
//   sqrt(t) = (q + sqrt(q^2 + 2 lambda)) / (sigma |omega|),  q = N^-1(p).
// lambda may carry a log pi_m correction and go negative; the square root
// must stay real.
inline double time_bound(double lambda, double sigma, double omega, double p) {
    if (omega == 0.0) throw std::domain_error("time_bound: omega must be nonzero");
    double q = normal_quantile(p);
    double radicand = q * q + 2.0 * lambda;
    if (radicand < 0.0)
        throw std::domain_error("time_bound: negative discriminant, bound not real");
    double root = (q + std::sqrt(radicand)) / (sigma * std::abs(omega));
    if (!(root > 0.0))
        throw std::domain_error("time_bound: bound not positive for these parameters");
    return root * root;
}

// Level gap to the upper neighbour, omega_{j+1,j} = pi^2 (2j+1) / alpha^2
// in units of eps.
inline double upper_gap(double alpha, int j) {
    return pi * pi * static_cast<double>(2 * j + 1) / (alpha * alpha);
}

// Relaxation timescale for terminal state j: the confidence-p time for the
// upper-neighbour decay factor to fall below e^-lambda. Zero when alpha = 1,
// where the row is a point mass and reduction is immediate.
inline double tau_relax(double alpha, int j, double sigma, double lambda, double p = 0.95) {
    if (j < 1) throw std::domain_error("tau_relax: j must be >= 1");
    if (!(alpha >= 1.0)) throw std::domain_error("tau_relax: alpha must be >= 1");
    if (alpha == 1.0) return 0.0;
    return time_bound(lambda, sigma, upper_gap(alpha, j), p);
}

// Rounded-constant shortcut 40 alpha^4 / (pi^4 sigma^2 (2j+1)^2) for
// lambda = 10; the un-rounded route above is canonical.
inline double tau_relax_rounded(double alpha, int j, double sigma) {
    if (j < 1) throw std::domain_error("tau_relax_rounded: j must be >= 1");
    if (!(alpha >= 1.0)) throw std::domain_error("tau_relax_rounded: alpha must be >= 1");
    if (alpha == 1.0) return 0.0;
    double g = static_cast<double>(2 * j + 1);
    return 40.0 * std::pow(alpha, 4) / (pi * pi * pi * pi * sigma * sigma * g * g);
}

// Ground-state relaxation timescale for a small expansion alpha = 1 + eps,
// where the lambda in the decay bound is offset by log pi_2 ~ log(16/9 eps^2):
//   tau = (q + sqrt(2 lambda + 4 log(4 eps / 3) + q^2))^2 / (sigma^2 omega_21^2).
// For fixed (lambda, p) the bound is only real for eps above a floor, which
// the error message reports.
inline double tau_relax_small_expansion(double eps_pert, double sigma, double lambda, double p) {
    if (!(eps_pert > 0.0))
        throw std::domain_error("tau_relax_small_expansion: eps must be > 0");
    double q = normal_quantile(p);
    double radicand = 2.0 * lambda + 4.0 * std::log(4.0 * eps_pert / 3.0) + q * q;
    if (radicand < 0.0) {
        double eps_min = 0.75 * std::exp(-(2.0 * lambda + q * q) / 4.0);
        std::ostringstream msg;
        msg << "tau_relax_small_expansion: bound not real; smallest viable eps for"
            << " lambda=" << lambda << ", p=" << p << " is " << eps_min;
        throw std::domain_error(msg.str());
    }
    double alpha = 1.0 + eps_pert;
    double omega21 = 3.0 * pi * pi / (alpha * alpha);
    double num = q + std::sqrt(radicand);
    return num * num / (sigma * sigma * omega21 * omega21);
}

// First time |H - target| enters the tolerance band and stays inside for the
// rest of the grid; a single crossing that later leaves does not count.
inline std::optional<double> first_sustained_entry(std::span<const double> grid,
                                                   std::span<const double> energy,
                                                   double target, double tol) {
    if (grid.size() != energy.size() || grid.empty())
        throw std::invalid_argument("first_sustained_entry: bad path");
    std::size_t k = grid.size();
    while (k > 0 && std::abs(energy[k - 1] - target) < tol) --k;
    if (k == grid.size()) return std::nullopt; // never inside at the end: censored
    return grid[k];
}

struct RelaxationTimes {
    std::vector<double> relaxed; // sorted entry times
    int censored = 0;

    int total() const { return static_cast<int>(relaxed.size()) + censored; }

    // Quantiles rank censored runs as +infinity rather than dropping them.
    double quantile(double q) const {
        if (total() == 0) throw std::domain_error("RelaxationTimes: empty");
        auto rank = static_cast<std::size_t>(q * static_cast<double>(total() - 1) + 0.5);
        if (rank < relaxed.size()) return relaxed[rank];
        return std::numeric_limits<double>::infinity();
    }
    double median() const { return quantile(0.5); }
    double percentile95() const { return quantile(0.95); }

    double fraction_relaxed_by(double tau) const {
        if (total() == 0) throw std::domain_error("RelaxationTimes: empty");
        auto it = std::upper_bound(relaxed.begin(), relaxed.end(), tau);
        return static_cast<double>(it - relaxed.begin()) / static_cast<double>(total());
    }
};

// Scans conditioned trajectories for the sustained-band entry time towards
// each trajectory's own conditioning level.
inline RelaxationTimes measure_relaxation(std::span<const filtering::FilteredTrajectory> paths,
                                          std::span<const double> energies, double tol_energy) {
    RelaxationTimes out;
    for (const auto& traj : paths) {
        double target = energies[static_cast<std::size_t>(traj.outcome - 1)];
        auto entry = first_sustained_entry(traj.grid, traj.energy, target, tol_energy);
        if (entry)
            out.relaxed.push_back(*entry);
        else
            ++out.censored;
    }
    std::sort(out.relaxed.begin(), out.relaxed.end());
    return out;
}

// max over m != j (within the truncated basis) of log M_mj at (B_t, t).
inline double max_competing_log_decay(int j, double brownian, double t, double sigma,
                                      std::span<const double> energies) {
    if (j < 1 || static_cast<std::size_t>(j) > energies.size())
        throw std::domain_error("max_competing_log_decay: j outside basis");
    double e_j = energies[static_cast<std::size_t>(j - 1)];
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < energies.size(); ++m) {
        if (static_cast<int>(m) + 1 == j) continue;
        best = std::max(best, log_decay_factor(brownian, t, sigma, energies[m] - e_j));
    }
    return best;
}

} // namespace qrelax::relaxation
