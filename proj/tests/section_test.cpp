#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "besselh/section.hpp"
#include "generators.hpp"

using namespace besselh;
using besselh::testing::Gen;

namespace {

// Exhaustive search over every dyadic interval of scales [n_lo, n_hi] meeting the
// window for those with F(I) <= 1 < F(parent).
std::vector<DyadicInterval> brute_force_section(const WeightedMeasure& m, const Potential& V, const Interval& window,
                                                int n_lo, int n_hi, const SectionOptions& opt) {
    std::vector<DyadicInterval> out;
    for (int n = n_lo; n <= n_hi; ++n) {
        std::vector<DyadicInterval> candidates{DyadicInterval::left(n)};
        const auto k_max = static_cast<std::int64_t>(std::ceil(std::ldexp(window.b(), -n)));
        for (std::int64_t k = 1; k <= k_max; ++k) candidates.push_back(DyadicInterval::standard(k, n));
        for (const auto& I : candidates) {
            if (!I.interval().overlaps(window)) continue;
            const double f = s_functional(m, V, I, opt.convention);
            const double fp = s_functional(m, V, I.parent(), opt.convention);
            if (f <= 1 + opt.threshold_slack && fp > 1 + opt.threshold_slack) out.push_back(I);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<DyadicInterval> constant_one_expected() {
    std::vector<DyadicInterval> v{DyadicInterval::left(-1)};
    for (int k = 1; k <= 7; ++k) v.push_back(DyadicInterval::standard(k, -1));
    return v;
}

}  // namespace

TEST(Dyadic, Parents) {
    EXPECT_EQ(DyadicInterval::standard(1, -1).parent(), DyadicInterval::left(0));
    EXPECT_EQ(DyadicInterval::standard(1, 0).parent(), DyadicInterval::left(1));
    EXPECT_EQ(DyadicInterval::left(0).parent(), DyadicInterval::left(1));
    EXPECT_EQ(DyadicInterval::standard(5, 0).parent(), DyadicInterval::standard(2, 1));
    EXPECT_THROW(DyadicInterval::standard(0, 0), std::invalid_argument);
}

TEST(Dyadic, ParentContainsDoubledInterval) {
    Gen gen(31);
    for (int i = 0; i < 2000; ++i) {
        const int n = gen.integer(-20, 20);
        const auto I = gen.integer(0, 5) == 0 ? DyadicInterval::left(n) : DyadicInterval::standard(gen.integer(1, 5000), n);
        const auto P = I.parent();
        EXPECT_TRUE(P.interval().contains(I.interval()));
        EXPECT_EQ(P.n(), I.n() + 1);
        EXPECT_TRUE(enlarge(P.interval(), 2).support.contains(enlarge(I.interval(), 2).support));
        for (const auto& c : I.children()) EXPECT_EQ(c.parent(), I);
    }
}

TEST(Dyadic, PointLookup) {
    EXPECT_EQ(dyadic_at(0.3, -1), DyadicInterval::left(-1));
    EXPECT_EQ(dyadic_at(0.75, -1), DyadicInterval::standard(1, -1));
    EXPECT_EQ(dyadic_at(1.0, -1), DyadicInterval::standard(1, -1));
}

TEST(SFunctional, ConstantPotential) {
    const WeightedMeasure m(0.5);
    const auto one = Potential::constant(m, 1.0);
    EXPECT_DOUBLE_EQ(s_functional(m, one, DyadicInterval::standard(1, 0)), 4.0);
    EXPECT_DOUBLE_EQ(s_functional(m, one, DyadicInterval::standard(3, -2)), 0.25);
    EXPECT_EQ(s_functional(m, Potential::zero(m), DyadicInterval::standard(3, -2)), 0.0);
    // Truncated convention: 2(0,1] has support (0, 1.5).
    EXPECT_DOUBLE_EQ(s_functional(m, one, DyadicInterval::left(0), LengthConvention::Truncated), 2.25);
}

TEST(SFunctional, MonotoneAlongParents) {
    Gen gen(32);
    for (int i = 0; i < 1000; ++i) {
        const WeightedMeasure m(gen.uniform(0.02, 0.98));
        const auto V = gen.piecewise_potential(m, gen.integer(1, 5), 16.0, 10.0);
        const int n = gen.integer(-8, 3);
        const auto I = gen.integer(0, 4) == 0 ? DyadicInterval::left(n)
                                              : DyadicInterval::standard(gen.integer(1, static_cast<int>(std::ldexp(16.0, -n))), n);
        const double f = s_functional(m, V, I);
        EXPECT_LE(f, s_functional(m, V, I.parent()) * (1 + 1e-12) + 1e-300) << I.to_string();
    }
}

TEST(BuildSection, ConstantOneMatchesEnumeration) {
    const WeightedMeasure m(0.5);
    const auto V = Potential::constant(m, 1.0);
    const Interval window(0, 4);
    for (auto conv : {LengthConvention::Nominal, LengthConvention::Truncated}) {
        SectionOptions opt;
        opt.convention = conv;
        const auto s = build_section(m, V, window, opt);
        EXPECT_EQ(s.intervals, constant_one_expected());
        EXPECT_EQ(brute_force_section(m, V, window, -8, 4, opt), constant_one_expected());
        const auto report = validate_section(s);
        EXPECT_TRUE(report.ok());
        EXPECT_EQ(report.C0, 1.0);
    }
}

TEST(BuildSection, InversePowerMatchesEnumeration) {
    const WeightedMeasure m(0.5);
    const auto V = Potential::power(m, 1.0, 1.0);
    const Interval window(0, 8);
    const auto s = build_section(m, V, window);
    EXPECT_EQ(s.intervals, brute_force_section(m, V, window, -12, 6, {}));
    const auto report = validate_section(s);
    EXPECT_TRUE(report.ok());
    EXPECT_TRUE(std::isfinite(report.C0));
    // Lengths do not shrink moving away from the origin.
    for (std::size_t i = 1; i < s.intervals.size(); ++i) {
        EXPECT_GE(s.intervals[i].length(), s.intervals[i - 1].length() / 2);
    }
    EXPECT_LT(s.intervals.front().length(), s.intervals.back().length());
    RecordProperty("C0", std::to_string(report.C0));
}

TEST(BuildSection, DegenerateAndSingular) {
    const WeightedMeasure m(0.5);
    EXPECT_THROW(build_section(m, Potential::zero(m), Interval(0, 4)), DegeneratePotential);
    EXPECT_THROW(build_section(WeightedMeasure(1.5), Potential::constant(WeightedMeasure(1.5), 1.0), Interval(0, 4)),
                 std::invalid_argument);
}

TEST(BuildSection, RandomPiecewisePotentials) {
    Gen gen(33);
    double worst_c0 = 1.0;
    for (int trial = 0; trial < 60; ++trial) {
        const WeightedMeasure m(gen.uniform(0.05, 0.95));
        const auto V = gen.piecewise_potential(m, gen.integer(1, 6), 8.0, 50.0);
        const Interval window(0, gen.uniform(2.0, 8.0));
        const auto s = build_section(m, V, window);
        for (const auto& I : s.intervals) EXPECT_TRUE(stopping_rule_holds(m, V, I)) << I.to_string();
        const auto report = validate_section(s);
        EXPECT_TRUE(report.disjoint);
        EXPECT_TRUE(report.covers);
        EXPECT_TRUE(std::isfinite(report.C0));
        worst_c0 = std::max(worst_c0, report.C0);
        if (trial < 10) {
            const int n_lo = static_cast<int>(std::floor(std::log2(s.intervals.front().length()))) - 1;
            int n_hi = 0;
            for (const auto& I : s.intervals) n_hi = std::max(n_hi, I.n());
            EXPECT_EQ(s.intervals, brute_force_section(m, V, window, std::min(n_lo, -14), n_hi + 1, {}));
        }
    }
    RecordProperty("max_C0", std::to_string(worst_c0));
}

TEST(ValidateSection, DetectsOverlapAndGaps) {
    const auto r = validate_section({Interval(0.5, 1.5), Interval(1, 2)}, Interval(0.5, 2), 1.05);
    EXPECT_FALSE(r.disjoint);
    ASSERT_EQ(r.overlaps.size(), 1u);
    EXPECT_EQ(r.overlaps[0].first, Interval(0.5, 1.5));
    const auto g = validate_section({Interval(0, 1), Interval(1.5, 2)}, Interval(0, 3), 1.05);
    EXPECT_TRUE(g.disjoint);
    EXPECT_FALSE(g.covers);
    ASSERT_EQ(g.gaps.size(), 2u);
    EXPECT_EQ(g.gaps[0], Interval(1, 1.5));
    EXPECT_EQ(g.gaps[1], Interval(2, 3));
    const auto n = validate_section({Interval(0, 1), Interval(1, 5)}, Interval(0, 5), 1.2);
    EXPECT_EQ(n.C0, 4.0);
    EXPECT_FALSE(n.beta_admissible);  // (1 + 1/4)^{1/3} < 1.2
    EXPECT_TRUE(validate_section({Interval(0, 1), Interval(1, 5)}, Interval(0, 5), 1.05).ok());
}

TEST(Serialization, RoundTrip) {
    const WeightedMeasure m(0.5);
    const auto s = build_section(m, Potential::power(m, 1.0, 1.0), Interval(0, 8));
    std::istringstream in(serialize_section(s));
    const auto back = parse_section(in);
    EXPECT_EQ(back.intervals, s.intervals);
    EXPECT_EQ(back.alpha, s.alpha);
    EXPECT_EQ(back.window, s.window);
    std::istringstream bad("# alpha 0.5\n# beta 1.05\n# window 0 1\nstd 0 3\n");
    EXPECT_THROW(parse_section(bad), ParseError);
}
