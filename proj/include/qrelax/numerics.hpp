#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace qrelax::numerics {

inline constexpr double pi = 3.141592653589793238462643383279502884;

// Kahan compensated accumulator for long sums.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        double y = x - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

// n points geometrically spaced from a to b (inclusive). Requires a, b > 0.
inline std::vector<double> geomspace(double a, double b, std::size_t n) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("geomspace: endpoints must be positive");
    if (n < 2) throw std::invalid_argument("geomspace: need at least two points");
    std::vector<double> out(n);
    double log_a = std::log(a);
    double step = (std::log(b) - log_a) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(log_a + step * static_cast<double>(i));
    out.front() = a;
    out.back() = b;
    return out;
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    if (n < 2) throw std::invalid_argument("linspace: need at least two points");
    std::vector<double> out(n);
    double step = (b - a) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = a + step * static_cast<double>(i);
    out.back() = b;
    return out;
}

// Trapezoidal integral of samples f on grid t.
inline double trapezoid(std::span<const double> t, std::span<const double> f) {
    if (t.size() != f.size()) throw std::invalid_argument("trapezoid: grid/sample size mismatch");
    double acc = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k)
        acc += 0.5 * (f[k] + f[k - 1]) * (t[k] - t[k - 1]);
    return acc;
}

// Running trapezoidal integral; out[k] = integral over [t0, tk].
inline std::vector<double> cumulative_trapezoid(std::span<const double> t, std::span<const double> f) {
    if (t.size() != f.size()) throw std::invalid_argument("cumulative_trapezoid: size mismatch");
    std::vector<double> out(t.size(), 0.0);
    for (std::size_t k = 1; k < t.size(); ++k)
        out[k] = out[k - 1] + 0.5 * (f[k] + f[k - 1]) * (t[k] - t[k - 1]);
    return out;
}

// Normalises exp(w_m) into probabilities by shifting out the maximum
// exponent first. Entries with w = -inf come out exactly zero.
inline std::vector<double> softmax(std::span<const double> log_weights) {
    double wmax = -std::numeric_limits<double>::infinity();
    for (double w : log_weights) wmax = std::max(wmax, w);
    std::vector<double> p(log_weights.size(), 0.0);
    if (!(wmax > -std::numeric_limits<double>::infinity()))
        throw std::domain_error("softmax: all weights vanish");
    double norm = 0.0;
    for (std::size_t m = 0; m < p.size(); ++m) {
        p[m] = std::exp(log_weights[m] - wmax);
        norm += p[m];
    }
    for (double& x : p) x /= norm;
    return p;
}

// Ordinary least squares through the origin: slope of y against x.
inline double regression_slope_through_origin(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.empty()) throw std::invalid_argument("regression: bad inputs");
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
    }
    if (sxx == 0.0) throw std::domain_error("regression: degenerate predictor");
    return sxy / sxx;
}

inline double mean(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean: empty");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Unbiased sample variance.
inline double sample_variance(std::span<const double> v) {
    if (v.size() < 2) throw std::invalid_argument("sample_variance: need two samples");
    double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double median_of_sorted(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("median: empty");
    std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace qrelax::numerics
