#pragma once

// Dyadic intervals, the stopping-time section of a potential, and validation of
// interval families (essentially disjoint, covering, comparable neighbors).
//
// The dyadic family is {[k 2^n, (k+1) 2^n] : k >= 1} together with the left
// intervals (0, 2^n]. For a potential V the stopping functional is
//
//   F(I) = |2I|^2 / mu(2I) * \int_{2I} V dmu,
//
// and the section consists of the maximal dyadic I with F(I) <= 1.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "besselh/error.hpp"
#include "besselh/measure.hpp"

namespace besselh {

class DyadicInterval {
public:
    static DyadicInterval left(int n) { return DyadicInterval(0, n); }

    static DyadicInterval standard(std::int64_t k, int n) {
        if (k < 1) throw std::invalid_argument("DyadicInterval: standard intervals need k >= 1");
        if (k > (std::int64_t{1} << 53)) throw std::invalid_argument("DyadicInterval: k too large to represent");
        return DyadicInterval(k, n);
    }

    bool is_left() const noexcept { return k_ == 0; }
    std::int64_t k() const noexcept { return k_; }
    int n() const noexcept { return n_; }

    double length() const { return std::ldexp(1.0, n_); }
    double lo() const { return is_left() ? 0.0 : std::ldexp(static_cast<double>(k_), n_); }
    double hi() const { return std::ldexp(static_cast<double>(k_ + 1), n_); }
    Interval interval() const { return Interval(lo(), hi()); }

    /// Smallest dyadic interval strictly containing this one.
    DyadicInterval parent() const {
        if (is_left()) return left(n_ + 1);
        const std::int64_t k = k_ / 2;
        return k == 0 ? left(n_ + 1) : standard(k, n_ + 1);
    }

    std::vector<DyadicInterval> children() const {
        if (is_left()) return {left(n_ - 1), standard(1, n_ - 1)};
        return {standard(2 * k_, n_ - 1), standard(2 * k_ + 1, n_ - 1)};
    }

    std::string to_string() const {
        return is_left() ? "left " + std::to_string(n_) : "std " + std::to_string(k_) + " " + std::to_string(n_);
    }

    friend bool operator==(const DyadicInterval&, const DyadicInterval&) = default;

    /// Orders by left endpoint, then by length.
    friend std::partial_ordering operator<=>(const DyadicInterval& a, const DyadicInterval& b) {
        if (auto c = a.lo() <=> b.lo(); c != 0) return c;
        return a.n_ <=> b.n_;
    }

private:
    DyadicInterval(std::int64_t k, int n) : k_(k), n_(n) {
        if (n < -1000 || n > 1000) throw std::invalid_argument("DyadicInterval: scale out of range");
    }

    std::int64_t k_;  // 0 marks the left interval
    int n_;
};

/// Smallest dyadic interval containing the point x > 0 at scale n.
inline DyadicInterval dyadic_at(double x, int n) {
    const double s = std::ldexp(x, -n);
    auto k = static_cast<std::int64_t>(std::ceil(s)) - 1;  // x in (k 2^n, (k+1) 2^n]
    if (k < 1) return DyadicInterval::left(n);
    return DyadicInterval::standard(k, n);
}

/// F(I) = |2I|^2 / mu(2I) * \int_{2I} V dmu. The measure and potential integral use
/// the support of 2I; the length follows `convention`.
inline double s_functional(const WeightedMeasure& m, const Potential& V, const DyadicInterval& I,
                           LengthConvention convention = LengthConvention::Nominal) {
    const Ball doubled = enlarge(I.interval(), 2.0);
    const double len = doubled.length(convention);
    const double mass = m.mass(doubled.support.a(), doubled.support.b());
    return len * len / mass * potential_integral(m, V, doubled.support);
}

struct SectionOptions {
    double beta = 1.05;
    LengthConvention convention = LengthConvention::Nominal;
    /// F(I) <= 1 + threshold_slack counts as F(I) <= 1; absorbs rounding when F is exactly 1.
    double threshold_slack = 1e-12;
    int max_scale = 64;
    int min_scale = -60;
};

struct ProperSection {
    double alpha;
    double beta;
    Interval window;
    LengthConvention convention = LengthConvention::Nominal;
    std::vector<DyadicInterval> intervals;  ///< sorted by left endpoint
    double C0 = 1.0;                        ///< observed neighbor length ratio

    std::vector<Interval> as_intervals() const {
        std::vector<Interval> out;
        out.reserve(intervals.size());
        for (const auto& d : intervals) out.push_back(d.interval());
        return out;
    }

    /// Index of the interval containing x (the left one at shared endpoints).
    std::optional<std::size_t> find(double x) const {
        for (std::size_t i = 0; i < intervals.size(); ++i) {
            if (x >= intervals[i].lo() && x <= intervals[i].hi()) return i;
        }
        return std::nullopt;
    }
};

inline bool below_threshold(double F, const SectionOptions& opt) { return F <= 1.0 + opt.threshold_slack; }

/// Whether I is maximal with F(I) <= 1, i.e. F(I) <= 1 < F(parent).
inline bool stopping_rule_holds(const WeightedMeasure& m, const Potential& V, const DyadicInterval& I,
                                const SectionOptions& opt = {}) {
    return below_threshold(s_functional(m, V, I, opt.convention), opt) &&
           !below_threshold(s_functional(m, V, I.parent(), opt.convention), opt);
}

struct SectionValidationReport {
    bool disjoint = true;           ///< interiors pairwise disjoint
    bool covers = true;             ///< union contains the window
    bool neighbors_comparable = true;
    bool beta_admissible = true;
    double C0 = 1.0;
    double beta = 0.0;
    double beta_bound = 0.0;  ///< min(2^{1/3}, (1 + 1/C0)^{1/3})
    std::optional<std::pair<Interval, Interval>> worst_pair;
    std::vector<std::pair<Interval, Interval>> overlaps;
    std::vector<Interval> gaps;

    bool ok() const { return disjoint && covers && neighbors_comparable && beta_admissible; }
};

inline double beta_bound(double C0) { return std::min(std::cbrt(2.0), std::cbrt(1.0 + 1.0 / C0)); }

/// Checks a family of closed intervals against a window. Never throws on a bad
/// family; failures are reported with witnesses.
inline SectionValidationReport validate_section(std::vector<Interval> family, const Interval& window, double beta) {
    SectionValidationReport r;
    r.beta = beta;
    if (family.empty()) {
        r.covers = false;
        r.gaps.push_back(window);
        r.beta_bound = beta_bound(1.0);
        r.beta_admissible = beta > 1.0 && beta < r.beta_bound;
        return r;
    }
    std::sort(family.begin(), family.end(),
              [](const Interval& a, const Interval& b) { return a.a() < b.a() || (a.a() == b.a() && a.b() < b.b()); });
    auto eps = [](double x) { return 1e-12 * std::max(1.0, std::abs(x)); };

    // Overlaps: with intervals sorted by left endpoint, any overlap shows up between
    // an interval and the one reaching furthest right before it.
    std::size_t reach = 0;
    for (std::size_t i = 1; i < family.size(); ++i) {
        if (family[i].a() < family[reach].b() - eps(family[i].a())) {
            r.disjoint = false;
            r.overlaps.emplace_back(family[reach], family[i]);
        }
        if (family[i].b() > family[reach].b()) reach = i;
    }

    double covered = window.a();
    for (const auto& I : family) {
        if (I.a() > covered + eps(covered) && covered < window.b()) {
            r.gaps.emplace_back(covered, std::min(I.a(), window.b()));
        }
        covered = std::max(covered, I.b());
    }
    if (covered < window.b() - eps(window.b())) r.gaps.emplace_back(covered, window.b());
    r.covers = r.gaps.empty();

    double worst = 1.0;
    for (std::size_t i = 0; i < family.size(); ++i) {
        for (std::size_t j = i + 1; j < family.size() && family[j].a() <= family[i].b() + eps(family[i].b()); ++j) {
            const double ratio = std::max(family[i].length(), family[j].length()) /
                                 std::min(family[i].length(), family[j].length());
            if (ratio > worst || !r.worst_pair) {
                worst = std::max(worst, ratio);
                r.worst_pair = std::make_pair(family[i], family[j]);
            }
        }
    }
    r.C0 = worst;
    r.neighbors_comparable = std::isfinite(worst);
    r.beta_bound = beta_bound(worst);
    r.beta_admissible = beta > 1.0 && beta < r.beta_bound;
    return r;
}

inline SectionValidationReport validate_section(const ProperSection& s) {
    return validate_section(s.as_intervals(), s.window, s.beta);
}

/// Maximal dyadic intervals meeting `window` with F(I) <= 1.
inline ProperSection build_section(const WeightedMeasure& m, const Potential& V, const Interval& window,
                                   const SectionOptions& opt = {}) {
    if (!(m.alpha() > 0.0 && m.alpha() < 1.0)) {
        throw std::invalid_argument("build_section: alpha must lie in (0, 1)");
    }
    if (!(opt.beta > 1.0)) throw std::invalid_argument("build_section: beta must exceed 1");
    auto F = [&](const DyadicInterval& I) {
        const double f = s_functional(m, V, I, opt.convention);
        if (!std::isfinite(f)) {
            throw NonLocallyIntegrable("build_section: potential integral over 2I diverges for " + I.to_string());
        }
        return f;
    };

    int n = static_cast<int>(std::ceil(std::log2(window.b())));
    while (std::ldexp(1.0, n) < window.b()) ++n;
    DyadicInterval top = DyadicInterval::left(n);
    while (below_threshold(F(top), opt)) {
        if (top.n() >= opt.max_scale) {
            throw DegeneratePotential("build_section: F(I) <= 1 on every dyadic ancestor of the window up to scale 2^" +
                                      std::to_string(opt.max_scale));
        }
        top = top.parent();
    }

    ProperSection s{m.alpha(), opt.beta, window, opt.convention, {}, 1.0};
    std::vector<DyadicInterval> stack{top};
    while (!stack.empty()) {
        const DyadicInterval I = stack.back();
        stack.pop_back();
        for (const auto& child : I.children()) {
            if (!child.interval().overlaps(window)) continue;
            if (below_threshold(F(child), opt)) {
                s.intervals.push_back(child);
            } else {
                if (child.n() <= opt.min_scale) {
                    throw Error("build_section: stopping rule not met above scale 2^" + std::to_string(opt.min_scale) +
                                " near " + std::to_string(child.lo()));
                }
                stack.push_back(child);
            }
        }
    }
    std::sort(s.intervals.begin(), s.intervals.end());
    s.C0 = validate_section(s).C0;
    return s;
}

/// Text form: header lines `# alpha`, `# beta`, `# window`, `# length`, then one interval per
/// line as `left <n>` or `std <k> <n>`.
inline std::string serialize_section(const ProperSection& s) {
    std::ostringstream out;
    out.precision(17);
    out << "# alpha " << s.alpha << '\n';
    out << "# beta " << s.beta << '\n';
    out << "# window " << s.window.a() << ' ' << s.window.b() << '\n';
    out << "# length " << (s.convention == LengthConvention::Nominal ? "nominal" : "truncated") << '\n';
    for (const auto& I : s.intervals) out << I.to_string() << '\n';
    return out.str();
}

inline ProperSection parse_section(std::istream& in) {
    std::optional<double> alpha, beta;
    std::optional<Interval> window;
    LengthConvention convention = LengthConvention::Nominal;
    std::vector<DyadicInterval> intervals;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string word;
        if (!(ss >> word)) continue;
        if (word == "#") {
            std::string key;
            if (!(ss >> key)) continue;
            if (key == "alpha") {
                double v;
                if (!(ss >> v)) throw ParseError("bad alpha header", lineno);
                alpha = v;
            } else if (key == "beta") {
                double v;
                if (!(ss >> v)) throw ParseError("bad beta header", lineno);
                beta = v;
            } else if (key == "window") {
                double a, b;
                if (!(ss >> a >> b) || !(b > a) || a < 0) throw ParseError("bad window header", lineno);
                window = Interval(a, b);
            } else if (key == "length") {
                std::string v;
                ss >> v;
                if (v == "nominal") convention = LengthConvention::Nominal;
                else if (v == "truncated") convention = LengthConvention::Truncated;
                else throw ParseError("bad length header '" + v + "'", lineno);
            }
            continue;
        }
        try {
            if (word == "left") {
                int n;
                if (!(ss >> n)) throw ParseError("expected 'left <n>'", lineno);
                intervals.push_back(DyadicInterval::left(n));
            } else if (word == "std") {
                std::int64_t k;
                int n;
                if (!(ss >> k >> n)) throw ParseError("expected 'std <k> <n>'", lineno);
                intervals.push_back(DyadicInterval::standard(k, n));
            } else {
                throw ParseError("unknown interval kind '" + word + "'", lineno);
            }
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    if (!alpha || !beta || !window) throw ParseError("missing alpha, beta or window header", 0);
    ProperSection s{*alpha, *beta, *window, convention, std::move(intervals), 1.0};
    std::sort(s.intervals.begin(), s.intervals.end());
    s.C0 = validate_section(s).C0;
    return s;
}

}  // namespace besselh
