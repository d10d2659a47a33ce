#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace tbdtrack {

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean: empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double sample_variance(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("sample_variance: need at least two samples");
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

namespace detail {

/// Regularized incomplete beta I_x(a, b) by the standard continued fraction
/// (modified Lentz), with the symmetry switch for fast convergence.
inline double incomplete_beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kTiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

} // namespace detail

inline double regularized_incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw std::domain_error("regularized_incomplete_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::incomplete_beta_cf(a, b, x) / a;
    return 1.0 - front * detail::incomplete_beta_cf(b, a, 1.0 - x) / b;
}

/// P(T > t) for Student's t with df degrees of freedom.
inline double student_t_sf(double t, double df) {
    if (df <= 0.0) throw std::domain_error("student_t_sf: df must be > 0");
    const double x = df / (df + t * t);
    const double tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x);
    return t >= 0.0 ? tail : 1.0 - tail;
}

struct PairedTTest {
    double mean_diff = 0.0;
    double t_statistic = 0.0;
    double p_value_one_sided = 1.0; // H1: mean(a - b) > 0
    std::size_t n = 0;
};

/// One-sided paired t-test for mean(a - b) > 0.
inline PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("paired_t_test: need at least two pairs");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    PairedTTest r;
    r.n = d.size();
    r.mean_diff = mean(d);
    const double var = sample_variance(d);
    if (var == 0.0) {
        r.t_statistic = r.mean_diff > 0.0 ? std::numeric_limits<double>::infinity()
                       : r.mean_diff < 0.0 ? -std::numeric_limits<double>::infinity()
                                           : 0.0;
        r.p_value_one_sided = r.mean_diff > 0.0 ? 0.0 : 1.0;
        return r;
    }
    r.t_statistic = r.mean_diff / std::sqrt(var / static_cast<double>(r.n));
    r.p_value_one_sided = student_t_sf(r.t_statistic, static_cast<double>(r.n - 1));
    return r;
}

} // namespace tbdtrack
