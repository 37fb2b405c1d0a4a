#pragma once

// Exponentially scaled modified Bessel function of the first kind,
// e^{-z} I_nu(z), for real order nu > -1 and z >= 0.
//
// Two branches: the power series (all terms positive, so no cancellation) below
// a crossover point and the large-argument Hankel expansion above it. The
// crossover grows with nu^2 so that the asymptotic series is still accurate
// to full precision when it takes over.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace besselh::bessel {

inline void check_order(double order) {
    if (!(order > -1.0) || !std::isfinite(order)) {
        throw std::domain_error("bessel: order must be > -1");
    }
}

/// Argument above which the asymptotic branch is used.
inline double crossover(double order) { return std::max(30.0, 2.0 * order * order + 20.0); }

/// e^{-z} I_nu(z) (z/2)^{-nu} by the power series. This reduced form is finite and
/// positive at z = 0 (value 1 / Gamma(nu + 1)), which is what the heat kernel needs.
inline double reduced_series(double order, double z) {
    const double q = 0.25 * z * z;
    double term = 1.0 / std::tgamma(order + 1.0);
    double sum = term;
    for (int m = 1; m < 1000; ++m) {
        term *= q / (m * (m + order));
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return sum * std::exp(-z);
}

/// e^{-z} I_nu(z) by the power series.
inline double series(double order, double z) {
    check_order(order);
    if (z == 0.0) {
        if (order == 0.0) return 1.0;
        return order > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    // Combine the prefactor in log space to avoid overflow of (z/2)^nu / Gamma for large orders.
    const double q = 0.25 * z * z;
    double term = 1.0;
    double sum = 1.0;
    for (int m = 1; m < 1000; ++m) {
        term *= q / (m * (m + order));
        sum += term;
        if (term < sum * 1e-17) break;
    }
    const double log_prefactor = order * std::log(0.5 * z) - std::lgamma(order + 1.0) - z;
    return sum * std::exp(log_prefactor);
}

/// e^{-z} I_nu(z) by the Hankel expansion
///   (2 pi z)^{-1/2} sum_k (-1)^k a_k(nu) / z^k,
/// truncated at the smallest term. Only accurate for z well above nu^2.
inline double asymptotic(double order, double z) {
    check_order(order);
    const double mu = 4.0 * order * order;
    double term = 1.0;
    double sum = 1.0;
    double last = 1.0;
    for (int k = 1; k < 200; ++k) {
        const double odd = 2.0 * k - 1.0;
        const double next = term * (-(mu - odd * odd)) / (8.0 * k * z);
        if (std::abs(next) > last) break;  // series started diverging
        term = next;
        sum += term;
        last = std::abs(term);
        if (last < std::abs(sum) * 1e-17) break;
    }
    constexpr double two_pi = 6.283185307179586476925286766559;
    return sum / std::sqrt(two_pi * z);
}

}  // namespace besselh::bessel

namespace besselh {

/// e^{-z} I_order(z).
inline double bessel_i_scaled(double order, double z) {
    bessel::check_order(order);
    if (!(z >= 0.0)) throw std::domain_error("bessel_i_scaled: z must be >= 0");
    if (z < bessel::crossover(order)) return bessel::series(order, z);
    return bessel::asymptotic(order, z);
}

/// log of e^{-z} I_nu(z) (z/2)^{-nu}; finite for every z >= 0.
inline double log_reduced_bessel(double order, double z) {
    bessel::check_order(order);
    if (z < bessel::crossover(order)) return std::log(bessel::reduced_series(order, z));
    return std::log(bessel::asymptotic(order, z)) - order * std::log(0.5 * z);
}

/// d/dz of log_reduced_bessel, equal to I_{nu+1}(z) / I_nu(z) - 1.
inline double log_reduced_bessel_derivative(double order, double z) {
    bessel::check_order(order);
    if (z == 0.0) return -1.0;
    return std::exp(log_reduced_bessel(order + 1.0, z) - log_reduced_bessel(order, z)) * 0.5 * z - 1.0;
}

}  // namespace besselh
