#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "besselh/bessel.hpp"

using namespace besselh;
using Big = boost::multiprecision::cpp_bin_float_50;

namespace {

// e^{-z} I_{1/2}(z) and e^{-z} I_{3/2}(z) from their elementary closed forms,
// evaluated with 50 significant digits.
double half_order_reference(double z) {
    const Big x(z);
    const Big pi = boost::math::constants::pi<Big>();
    return static_cast<double>(sqrt(2 / (pi * x)) * sinh(x) * exp(-x));
}

double three_halves_reference(double z) {
    const Big x(z);
    const Big pi = boost::math::constants::pi<Big>();
    return static_cast<double>(sqrt(2 / (pi * x)) * (cosh(x) - sinh(x) / x) * exp(-x));
}

std::vector<double> log_sweep(double lo, double hi, int n) {
    std::vector<double> z;
    for (int i = 0; i <= n; ++i) z.push_back(lo * std::pow(hi / lo, double(i) / n));
    return z;
}

}  // namespace

TEST(Bessel, KnownValues) {
    EXPECT_NEAR(bessel_i_scaled(0.5, 1.0), 0.34495131388824463, 1e-15);
    EXPECT_NEAR(bessel_i_scaled(0.5, 100.0), 0.039894228040143268, 1e-16);
    EXPECT_EQ(bessel_i_scaled(0.7, 0.0), 0.0);
    EXPECT_EQ(bessel_i_scaled(0.0, 0.0), 1.0);
    EXPECT_THROW(bessel_i_scaled(-1.0, 1.0), std::domain_error);
    EXPECT_THROW(bessel_i_scaled(0.5, -1.0), std::domain_error);
}

TEST(Bessel, HalfIntegerOrdersMatchClosedForms) {
    double worst = 0.0;
    for (double z : log_sweep(1e-6, 700.0, 4000)) {
        const double r1 = half_order_reference(z);
        const double r3 = three_halves_reference(z);
        const double e1 = std::abs(bessel_i_scaled(0.5, z) / r1 - 1.0);
        const double e3 = std::abs(bessel_i_scaled(1.5, z) / r3 - 1.0);
        ASSERT_LT(e1, 1e-12) << "order 1/2, z = " << z;
        ASSERT_LT(e3, 1e-12) << "order 3/2, z = " << z;
        worst = std::max({worst, e1, e3});
    }
    RecordProperty("max_relative_error", std::to_string(worst));
}

TEST(Bessel, BranchesAgreeAtCrossover) {
    for (double order : {-0.45, -0.25, 0.0, 0.25, 0.5, 1.0, 1.5, 2.5, 3.7}) {
        const double z = bessel::crossover(order);
        const double s = bessel::series(order, z);
        const double a = bessel::asymptotic(order, z);
        EXPECT_LT(std::abs(s / a - 1.0), 1e-12) << "order " << order;
    }
}

TEST(Bessel, ReducedFormConsistentWithScaled) {
    for (double order : {-0.35, 0.25, 1.5}) {
        for (double z : log_sweep(1e-3, 500.0, 50)) {
            const double reduced = std::exp(log_reduced_bessel(order, z));
            const double scaled = bessel_i_scaled(order, z);
            EXPECT_NEAR(reduced * std::pow(0.5 * z, order) / scaled, 1.0, 1e-12) << order << " " << z;
        }
        EXPECT_NEAR(std::exp(log_reduced_bessel(order, 0.0)), 1.0 / std::tgamma(order + 1.0), 1e-15);
    }
}

TEST(Bessel, LogDerivativeMatchesDifferences) {
    for (double order : {-0.25, 0.5, 2.0}) {
        for (double z : {1e-3, 0.5, 3.0, 29.0, 45.0, 200.0}) {
            const double h = 1e-5 * std::max(1.0, z);
            const double fd = (log_reduced_bessel(order, z + h) - log_reduced_bessel(order, z - h)) / (2 * h);
            EXPECT_NEAR(log_reduced_bessel_derivative(order, z), fd, 1e-7) << order << " " << z;
        }
    }
}
