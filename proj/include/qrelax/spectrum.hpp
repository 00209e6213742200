#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "qrelax/numerics.hpp"
#include "qrelax/units.hpp"

namespace qrelax::spectrum {

using numerics::pi;

// eps_n = pi^2 hbar^2 n^2 / (2 mu L^2); pi^2 n^2 in units of eps.
inline double pre_expansion_energy(int n, const WellModel& model) {
    if (n < 1) throw std::domain_error("pre_expansion_energy: n must be >= 1");
    return pi * pi * static_cast<double>(n) * static_cast<double>(n) * model.characteristic_energy();
}

// E_m = pi^2 hbar^2 m^2 / (2 mu alpha^2 L^2); pi^2 m^2 / alpha^2 in units of eps.
inline double post_expansion_energy(int m, const WellModel& model) {
    if (m < 1) throw std::domain_error("post_expansion_energy: m must be >= 1");
    double a = model.expansion;
    return pi * pi * static_cast<double>(m) * static_cast<double>(m) / (a * a) *
           model.characteristic_energy();
}

inline std::vector<double> post_expansion_energies(const WellModel& model) {
    model.validate();
    std::vector<double> e(static_cast<std::size_t>(model.truncation));
    for (int m = 1; m <= model.truncation; ++m)
        e[static_cast<std::size_t>(m - 1)] = post_expansion_energy(m, model);
    return e;
}

// sqrt(2/width) sin(m pi x / width) on [0, width].
inline double eigenfunction_value(int m, double x, double width) {
    if (m < 1) throw std::domain_error("eigenfunction_value: m must be >= 1");
    if (!(width > 0.0)) throw std::domain_error("eigenfunction_value: width must be > 0");
    if (x < 0.0 || x > width) throw std::domain_error("eigenfunction_value: x outside well");
    return std::sqrt(2.0 / width) * std::sin(static_cast<double>(m) * pi * x / width);
}

namespace detail {

// Reduced evaluation of sin(pi m / alpha): with r = m/alpha and k = round(r),
// sin(pi r) = (-1)^k sin(pi (r - k)). Keeps accuracy near the sine zeros and
// makes probabilities at integer m/alpha exactly zero.
struct ReducedSine {
    int nearest;       // k
    double fractional; // r - k
    double value;      // sin(pi r), sign included
};

inline ReducedSine reduced_sine(int m, double alpha) {
    double r = static_cast<double>(m) / alpha;
    int k = static_cast<int>(std::lround(r));
    double d = r - static_cast<double>(k);
    double s = std::sin(pi * d);
    if (k % 2 != 0) s = -s;
    return {k, d, s};
}

inline bool at_sine_zero(int m, double alpha, int k) {
    if (k < 1) return false;
    double ka = static_cast<double>(k) * alpha;
    return std::abs(static_cast<double>(m) - ka) <
           1e-9 * std::max(static_cast<double>(m), ka);
}

} // namespace detail

// pi_nm = 4 alpha^3 n^2 sin^2(pi m / alpha) / (pi^2 (m^2 - alpha^2 n^2)^2).
// The 0/0 at m = alpha n is removable; the analytic limit is 1/alpha.
inline double transition_probability(int n, int m, double alpha) {
    if (n < 1 || m < 1) throw std::domain_error("transition_probability: indices must be >= 1");
    if (!(alpha >= 1.0)) throw std::domain_error("transition_probability: alpha must be >= 1");
    auto rs = detail::reduced_sine(m, alpha);
    if (detail::at_sine_zero(m, alpha, rs.nearest))
        return rs.nearest == n ? 1.0 / alpha : 0.0;
    double nn = static_cast<double>(n);
    double mm = static_cast<double>(m);
    double gap = mm * mm - alpha * alpha * nn * nn;
    return 4.0 * alpha * alpha * alpha * nn * nn * rs.value * rs.value / (pi * pi * gap * gap);
}

// Signed overlap integral c_nm = int_0^L phi_n chi_m dx, so that
// c_nm^2 = pi_nm. The closed form is
//   c_nm = (-1)^(n+1) 2 alpha^(3/2) n sin(pi m / alpha) / (pi (alpha^2 n^2 - m^2)),
// with limit 1/sqrt(alpha) at the resonance m = alpha n.
inline double transition_amplitude(int n, int m, double alpha) {
    if (n < 1 || m < 1) throw std::domain_error("transition_amplitude: indices must be >= 1");
    if (!(alpha >= 1.0)) throw std::domain_error("transition_amplitude: alpha must be >= 1");
    auto rs = detail::reduced_sine(m, alpha);
    if (detail::at_sine_zero(m, alpha, rs.nearest))
        return rs.nearest == n ? 1.0 / std::sqrt(alpha) : 0.0;
    double nn = static_cast<double>(n);
    double mm = static_cast<double>(m);
    double c = 2.0 * alpha * std::sqrt(alpha) * nn * rs.value /
               (pi * (alpha * alpha * nn * nn - mm * mm));
    return (n % 2 == 0) ? -c : c;
}

// Transition probabilities from eigenstate n into the truncated basis of the
// expanded well, with the signed amplitudes carried alongside. Rows are not
// renormalised after truncation; the deficit is reported instead.
struct TransitionRow {
    int initial_index = 1;
    double expansion = 1.0;
    std::vector<double> probs;
    std::vector<double> amplitudes;

    int truncation() const { return static_cast<int>(probs.size()); }

    double probability_sum() const {
        numerics::KahanSum s;
        for (double p : probs) s.add(p);
        return s.value();
    }
    double probability_deficit() const { return 1.0 - probability_sum(); }
};

inline TransitionRow make_transition_row(int n, double alpha, int truncation) {
    if (n < 1) throw std::domain_error("make_transition_row: n must be >= 1");
    if (truncation < 2) throw std::domain_error("make_transition_row: truncation must be >= 2");
    TransitionRow row;
    row.initial_index = n;
    row.expansion = alpha;
    row.probs.resize(static_cast<std::size_t>(truncation));
    row.amplitudes.resize(static_cast<std::size_t>(truncation));
    for (int m = 1; m <= truncation; ++m) {
        row.probs[static_cast<std::size_t>(m - 1)] = transition_probability(n, m, alpha);
        row.amplitudes[static_cast<std::size_t>(m - 1)] = transition_amplitude(n, m, alpha);
    }
    return row;
}

inline TransitionRow make_transition_row(const WellModel& model, int n) {
    model.validate();
    return make_transition_row(n, model.expansion, model.truncation);
}

// |sum_{m<=N} pi_nm E_m - eps_n| / eps_n, the truncated version of the
// expected-energy conservation identity. Decays like 1/N.
inline double conservation_residual(int n, double alpha, int truncation) {
    if (n < 1) throw std::domain_error("conservation_residual: n must be >= 1");
    if (truncation < 2) throw std::domain_error("conservation_residual: truncation must be >= 2");
    double eps_n = pi * pi * static_cast<double>(n) * static_cast<double>(n);
    numerics::KahanSum acc;
    for (int m = 1; m <= truncation; ++m) {
        double e_m = pi * pi * static_cast<double>(m) * static_cast<double>(m) / (alpha * alpha);
        acc.add(transition_probability(n, m, alpha) * e_m);
    }
    return std::abs(acc.value() - eps_n) / eps_n;
}

// Leading order in eps of the ground-state transition probabilities when the
// expansion is alpha = 1 + eps:
//   m >= 2:  pi_m ~ 4 m^2 eps^2 / (m^2 - 1)^2
//   m == 1:  1 minus the sum of the above; the series constant
//            sum_{m>=2} 4 m^2/(m^2-1)^2 equals pi^2/3 + 1/4.
inline double small_perturbation_probability(int m, double eps_pert) {
    if (m < 1) throw std::domain_error("small_perturbation_probability: m must be >= 1");
    if (!(eps_pert >= 0.0)) throw std::domain_error("small_perturbation_probability: eps must be >= 0");
    if (m == 1) return 1.0 - (pi * pi / 3.0 + 0.25) * eps_pert * eps_pert;
    double mm = static_cast<double>(m);
    double denom = (mm * mm - 1.0);
    return 4.0 * mm * mm * eps_pert * eps_pert / (denom * denom);
}

} // namespace qrelax::spectrum
