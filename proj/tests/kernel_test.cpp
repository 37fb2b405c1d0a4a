#include <gtest/gtest.h>

#include "besselh/kernel.hpp"
#include "generators.hpp"

using namespace besselh;
using besselh::testing::Gen;

TEST(Kernel, Symmetric) {
    Gen gen(21);
    for (int i = 0; i < 2000; ++i) {
        const HeatKernel k(gen.uniform(0.05, 3.0), gen.log_uniform(1e-3, 1e3));
        const double x = gen.log_uniform(1e-3, 1e3);
        const double y = gen.log_uniform(1e-3, 1e3);
        const double pxy = k(x, y);
        const double pyx = k(y, x);
        EXPECT_GE(pxy, 0.0);
        if (pxy > 1e-300) {
            EXPECT_NEAR(pxy / pyx, 1.0, 1e-12);
        }
    }
}

TEST(Kernel, Positive) {
    Gen gen(22);
    for (int i = 0; i < 2000; ++i) {
        const HeatKernel k(gen.uniform(0.05, 3.0), gen.log_uniform(1e-2, 1e2));
        const double x = gen.log_uniform(1e-3, 10.0);
        const double y = x + gen.uniform(-1.0, 1.0) * std::sqrt(k.t());
        if (y > 0) {
            EXPECT_GT(k(x, y), 0.0);
        }
    }
}

TEST(Kernel, OriginLimit) {
    const HeatKernel k(0.5, 0.25);
    // (2t)^{-1} (4t)^{-nu} / Gamma(nu + 1) with nu = -1/4.
    EXPECT_NEAR(k.at_origin(), 2.0 / std::tgamma(0.75), 1e-14);
    EXPECT_NEAR(k(1e-9, 1e-9), k.at_origin(), 1e-9);
    EXPECT_NEAR(k(0.0, 0.0), k.at_origin(), 1e-14);
}

TEST(Kernel, EuclideanCaseAlphaTwo) {
    // alpha = 2 is the radial heat kernel in three dimensions, where I_{1/2} is elementary.
    const double t = 0.7;
    for (double x : {0.1, 1.0, 3.0}) {
        for (double y : {0.2, 1.5, 4.0}) {
            const double z = x * y / (2 * t);
            const double i_half = std::sqrt(2.0 / (M_PI * z)) * std::sinh(z);
            const double expect = 1.0 / (2 * t) / std::sqrt(x * y) * std::exp(-(x * x + y * y) / (4 * t)) * i_half;
            EXPECT_NEAR(HeatKernel(2.0, t)(x, y) / expect, 1.0, 1e-13);
        }
    }
}

TEST(Kernel, MassIsOne) {
    for (double alpha : {0.3, 0.5, 1.0, 2.0}) {
        for (double t : {0.01, 1.0, 100.0}) {
            for (double y : {0.1, 1.0, 10.0}) {
                const auto r = heat_kernel_mass_residual(HeatKernel(alpha, t), y, 1e-10);
                EXPECT_LT(r.residual, 1e-8) << alpha << " " << t << " " << y;
                EXPECT_TRUE(r.converged);
            }
        }
    }
    EXPECT_LT(heat_kernel_mass_residual(HeatKernel(0.5, 1.0), 1.0).residual, 1e-8);
    EXPECT_LT(heat_kernel_mass_residual(HeatKernel(2.0, 0.01), 5.0).residual, 1e-8);
    EXPECT_LT(heat_kernel_mass_residual(HeatKernel(0.5, 1e4), 1.0).residual, 1e-8);
}

TEST(Kernel, ChapmanKolmogorov) {
    Gen gen(23);
    for (int i = 0; i < 20; ++i) {
        const double alpha = gen.uniform(0.1, 2.5);
        const double t = gen.log_uniform(0.05, 5.0);
        const double s = gen.log_uniform(0.05, 5.0);
        const double x = gen.log_uniform(0.05, 5.0);
        const double y = gen.log_uniform(0.05, 5.0);
        const HeatKernel kt(alpha, t), ks(alpha, s), kts(alpha, t + s);
        const WeightedIntegrator quad(alpha);
        const double hi = std::max(x, y) + gaussian_radius(std::max(t, s));
        auto f = [&](double z) { return kt(x, z) * ks(z, y); };
        const auto r = quad.integrate(f, 0.0, hi, {x, y}, 1e-12, std::min(std::sqrt(std::min(t, s)), hi));
        EXPECT_NEAR(r.value / kts(x, y), 1.0, 1e-9);
    }
}

TEST(Kernel, GaussianSandwich) {
    for (double alpha : {0.3, 1.0, 2.0}) {
        GaussianSampleSpec spec;
        spec.samples = 3000;
        spec.seed = 5;
        const auto r = gaussian_bound_constants(WeightedMeasure(alpha), spec);
        EXPECT_TRUE(r.holds);
        EXPECT_LT(r.c1, 4.0);
        EXPECT_GT(r.c2, 4.0);
        EXPECT_LT(r.C, 50.0) << alpha;
        EXPECT_LT(r.C_derivative, 50.0) << alpha;
    }
}

TEST(Kernel, DiagonalTimesBallMassBounded) {
    for (double alpha : {0.3, 0.5, 2.0}) {
        const WeightedMeasure m(alpha);
        double lo = HUGE_VAL, hi = 0.0;
        for (double x : {1e-3, 0.1, 1.0, 10.0, 1e3}) {
            for (double t : {1e-4, 1e-2, 1.0, 1e2, 1e4}) {
                const Interval b = ball(x, std::sqrt(t)).support;
                const double q = HeatKernel(alpha, t)(x, x) * m.mass(b.a(), b.b());
                lo = std::min(lo, q);
                hi = std::max(hi, q);
            }
        }
        EXPECT_GT(lo, 0.05);
        EXPECT_LT(hi, 20.0);
    }
}

namespace {

GridPtr test_grid(double alpha) { return make_uniform_grid(alpha, 1.0 / 64, 12.0); }

}  // namespace

TEST(HeatApply, ConstantIsPreservedInside) {
    const double alpha = 0.5;
    auto g = test_grid(alpha);
    const auto one = GridFunction::sample(g, [](double) { return 1.0; });
    const auto out = heat_apply(WeightedMeasure(alpha), 0.1, one);
    for (std::size_t i = 0; i < g->size(); ++i) {
        if (g->node(i) < 8.0) {
            EXPECT_NEAR(out[i], 1.0, 1e-3) << g->node(i);
        }
        EXPECT_GE(out[i], 0.0);
    }
}

TEST(HeatApply, SemigroupLaw) {
    const double alpha = 0.7;
    auto g = test_grid(alpha);
    const WeightedMeasure m(alpha);
    const auto f = GridFunction::sample(g, [](double x) { return std::exp(-4 * (x - 2) * (x - 2)); });
    const auto two_steps = heat_apply(m, 0.2, heat_apply(m, 0.1, f));
    const auto one_step = heat_apply(m, 0.3, f);
    double worst = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) worst = std::max(worst, std::abs(two_steps[i] - one_step[i]));
    EXPECT_LT(worst, 1e-4 * one_step.sup_norm());
}

TEST(HeatApply, ShortTimeApproachesIdentity) {
    const double alpha = 0.5;
    auto g = make_uniform_grid(alpha, 1.0 / 1024, 4.0);
    const auto f = GridFunction::sample(g, [](double x) { return std::exp(-16 * (x - 1.5) * (x - 1.5)); });
    const WeightedMeasure m(alpha);
    const double near = (heat_apply(m, 1e-4, f) - f).l1_norm();
    const double far = (heat_apply(m, 1e-3, f) - f).l1_norm();
    EXPECT_LT(near, 5e-3 * f.l1_norm());
    EXPECT_LT(near, 0.2 * far);
}
