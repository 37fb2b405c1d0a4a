#pragma once

// Seeded random generators for property tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "besselh/measure.hpp"

namespace besselh::testing {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double log_uniform(double lo, double hi) { return lo * std::pow(hi / lo, uniform(0.0, 1.0)); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin() { return integer(0, 1) == 1; }
    std::mt19937_64& engine() { return rng_; }

    /// Sorted sample of n distinct points in (lo, hi).
    std::vector<double> sorted_points(int n, double lo, double hi) {
        std::vector<double> p;
        for (int i = 0; i < n; ++i) p.push_back(uniform(lo, hi));
        std::sort(p.begin(), p.end());
        return p;
    }

    /// Piecewise-constant potential with `pieces` random pieces inside (0, x_max).
    Potential piecewise_potential(const WeightedMeasure& m, int pieces, double x_max, double v_max) {
        std::vector<PotentialPiece> out;
        for (int i = 0; i < pieces; ++i) {
            const double a = uniform(0.0, x_max * 0.9);
            const double b = uniform(a + 1e-3 * x_max, x_max);
            out.push_back({Interval(a, b), uniform(0.0, v_max)});
        }
        return Potential(m, std::move(out));
    }

private:
    std::mt19937_64 rng_;
};

}  // namespace besselh::testing
