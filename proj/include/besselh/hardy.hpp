#pragma once

// Hardy-space building blocks on a grid: atoms, partitions of unity subordinate
// to a section, heat maximal functions and their L1(mu) norms, and the
// re-supporting of a cancellative atom onto the scale of a host interval.
//
// Everything discrete uses the grid measure mu_h(J) = sum of w_i over nodes
// x_i in J, so indicator functions integrate exactly.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "besselh/error.hpp"
#include "besselh/grid.hpp"
#include "besselh/kernel.hpp"
#include "besselh/measure.hpp"
#include "besselh/section.hpp"
#include "besselh/semigroup.hpp"

namespace besselh {

inline double smoothstep(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return u * u * (3.0 - 2.0 * u);
}

inline double smoothstep_slope(double u) { return (u <= 0.0 || u >= 1.0) ? 0.0 : 6.0 * u * (1.0 - u); }

/// Discrete indicator of J: 1 at the nodes inside [a, b].
inline GridFunction indicator(const GridPtr& grid, const Interval& J) {
    return GridFunction::sample(grid, [&](double x) { return (x >= J.a() && x <= J.b()) ? 1.0 : 0.0; });
}

enum class AtomKind {
    Cancellative,  ///< supported in I** of a host interval, mean zero
    Local,         ///< mu(I)^{-1} 1_I for a section interval
    Mu,            ///< supported in an arbitrary interval, mean zero
};

inline std::string to_string(AtomKind k) {
    switch (k) {
        case AtomKind::Cancellative: return "cancellative";
        case AtomKind::Local: return "local";
        case AtomKind::Mu: return "mu";
    }
    return "?";
}

inline constexpr double kCancellationTolerance = 1e-10;

class Atom {
public:
    AtomKind kind() const noexcept { return kind_; }
    const Interval& support() const noexcept { return support_; }
    const GridFunction& values() const noexcept { return values_; }
    const std::optional<Interval>& host() const noexcept { return host_; }
    /// Enlargement factor defining I* and I** of the host.
    double beta() const noexcept { return beta_; }
    const GridPtr& grid_ptr() const noexcept { return values_.grid_ptr(); }
    double operator[](std::size_t i) const { return values_[i]; }

    /// Scales b so that ||b||_inf = mu_h(support)^{-1}; returns the extracted
    /// coefficient lambda = ||b||_inf mu_h(support) and the atom b / lambda.
    static std::pair<double, Atom> normalize(AtomKind kind, const Interval& support, GridFunction b,
                                             std::optional<Interval> host = std::nullopt, double beta = 1.0) {
        const double mass = b.grid().mass(support.a(), support.b());
        if (!(mass > 0.0)) throw std::invalid_argument("Atom: support contains no grid node");
        const double lambda = b.sup_norm() * mass;
        if (!(lambda > 0.0)) throw std::invalid_argument("Atom: zero function");
        b *= 1.0 / lambda;
        return {lambda, Atom(kind, support, std::move(b), std::move(host), beta)};
    }

    static Atom make_local(const GridPtr& grid, const Interval& I) {
        const double mass = grid->mass(I.a(), I.b());
        if (!(mass > 0.0)) throw std::invalid_argument("local atom: interval contains no grid node");
        GridFunction v = indicator(grid, I);
        v *= 1.0 / mass;
        return Atom(AtomKind::Local, I, std::move(v), I, 1.0);
    }

    /// Mean-corrected profile on J, scaled to ||a||_inf = mu_h(J)^{-1}.
    static Atom make_mu(const GridPtr& grid, const Interval& J, const std::function<double(double)>& profile) {
        return Atom(AtomKind::Mu, J, cancellative_profile(grid, J, profile), std::nullopt, 1.0);
    }

    /// As make_mu, with the support required to lie in I** = beta^2 I of the host.
    static Atom make_cancellative(const GridPtr& grid, const Interval& host, double beta, const Interval& J,
                                  const std::function<double(double)>& profile) {
        const Interval outer = enlarge(host, beta * beta).support;
        const double slack = 1e-12 * std::max(1.0, outer.b());
        if (J.a() < outer.a() - slack || J.b() > outer.b() + slack) {
            std::ostringstream os;
            os << "cancellative atom: support [" << J.a() << ", " << J.b() << "] leaves I** = [" << outer.a()
               << ", " << outer.b() << "]";
            throw SupportViolation(os.str());
        }
        return Atom(AtomKind::Cancellative, J, cancellative_profile(grid, J, profile), host, beta);
    }

private:
    Atom(AtomKind kind, Interval support, GridFunction values, std::optional<Interval> host, double beta)
        : kind_(kind), support_(support), values_(std::move(values)), host_(std::move(host)), beta_(beta) {}

    static GridFunction cancellative_profile(const GridPtr& grid, const Interval& J,
                                             const std::function<double(double)>& profile) {
        const double mass = grid->mass(J.a(), J.b());
        if (!(mass > 0.0)) throw std::invalid_argument("atom: support contains no grid node");
        auto v = GridFunction::sample(grid, [&](double x) { return (x >= J.a() && x <= J.b()) ? profile(x) : 0.0; });
        auto remove_mean = [&] {
            const double mean = v.integral() / mass;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double x = grid->node(i);
                if (x >= J.a() && x <= J.b()) v[i] -= mean;
            }
        };
        remove_mean();
        const double sup = v.sup_norm();
        if (!(sup > 0.0) || !std::isfinite(sup)) throw std::invalid_argument("atom: profile is constant on the support");
        v *= 1.0 / (sup * mass);
        remove_mean();
        // The second correction can nudge the sup above the bound by rounding.
        const double over = v.sup_norm() * mass;
        if (over > 1.0) v *= 1.0 / over;
        return v;
    }

    AtomKind kind_;
    Interval support_;
    GridFunction values_;
    std::optional<Interval> host_;
    double beta_;
};

inline Atom make_atom(AtomKind kind, const GridPtr& grid, const Interval& support,
                      const std::function<double(double)>& profile = {}, std::optional<Interval> host = std::nullopt,
                      double beta = 1.05) {
    switch (kind) {
        case AtomKind::Local: return Atom::make_local(grid, support);
        case AtomKind::Mu: return Atom::make_mu(grid, support, profile);
        case AtomKind::Cancellative:
            if (!host) throw std::invalid_argument("make_atom: cancellative atoms need a host interval");
            return Atom::make_cancellative(grid, *host, beta, support, profile);
    }
    throw std::invalid_argument("make_atom: unknown kind");
}

struct AtomCheck {
    bool support_ok = false;
    bool size_ok = false;
    bool cancellation_ok = false;
    double size_ratio = 0.0;    ///< ||a||_inf mu_h(support)
    double cancellation = 0.0;  ///< |\int a dmu_h| / ||a||_{L1}
    bool ok() const noexcept { return support_ok && size_ok && cancellation_ok; }
};

/// Re-derives the invariants of the atom's kind from its values.
inline AtomCheck check_atom(const Atom& atom, double tolerance = kCancellationTolerance) {
    const auto& v = atom.values();
    const Grid& g = v.grid();
    const Interval& J = atom.support();
    const double mass = g.mass(J.a(), J.b());
    AtomCheck r;
    r.support_ok = mass > 0.0;
    std::optional<Interval> outer;
    if (atom.kind() == AtomKind::Cancellative && atom.host()) {
        outer = enlarge(*atom.host(), atom.beta() * atom.beta()).support;
        const double slack = 1e-12 * std::max(1.0, outer->b());
        r.support_ok = r.support_ok && J.a() >= outer->a() - slack && J.b() <= outer->b() + slack;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] != 0.0 && !J.contains(g.node(i))) r.support_ok = false;
    }
    r.size_ratio = v.sup_norm() * mass;
    r.size_ok = r.size_ratio <= 1.0 + 1e-12;
    const double l1 = v.l1_norm();
    if (atom.kind() == AtomKind::Local) {
        r.cancellation = 0.0;
        bool exact = true;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double want = J.contains(g.node(i)) ? 1.0 / mass : 0.0;
            if (std::abs(v[i] - want) > 1e-14 * want) exact = false;
        }
        r.cancellation_ok = exact;
        r.size_ok = r.size_ok && exact;
    } else {
        r.cancellation = l1 > 0.0 ? std::abs(v.integral()) / l1 : 0.0;
        r.cancellation_ok = l1 > 0.0 && r.cancellation <= tolerance;
    }
    return r;
}

struct WeightedAtom {
    double lambda;
    Atom atom;
};

struct AtomicCombination {
    std::vector<WeightedAtom> terms;

    double certificate() const {
        double s = 0.0;
        for (const auto& t : terms) s += std::abs(t.lambda);
        return s;
    }
};

struct Synthesis {
    GridFunction function;
    /// sum |lambda_n|, an upper bound for the atomic norm of `function`.
    double certificate;
};

inline Synthesis atomic_synthesize(const AtomicCombination& combo) {
    if (combo.terms.empty()) throw std::invalid_argument("atomic_synthesize: empty combination");
    GridFunction f(combo.terms.front().atom.grid_ptr());
    for (const auto& t : combo.terms) {
        if (t.atom.grid_ptr() != f.grid_ptr()) throw MixedGrids("atomic_synthesize: atoms live on different grids");
        const auto v = t.atom.values().values();
        for (std::size_t i = 0; i < v.size(); ++i) f[i] += t.lambda * v[i];
    }
    return {std::move(f), combo.certificate()};
}

/// "# key value" header followed by node,value rows.
inline void write_atom_csv(std::ostream& os, const Atom& atom, double lambda = 1.0) {
    os.precision(17);
    os << "# kind " << to_string(atom.kind()) << "\n";
    os << "# support " << atom.support().a() << " " << atom.support().b() << "\n";
    if (atom.host()) os << "# host " << atom.host()->a() << " " << atom.host()->b() << "\n";
    os << "# lambda " << lambda << "\n";
    os << "node,value\n";
    const Grid& g = atom.values().grid();
    for (std::size_t i = 0; i < g.size(); ++i) os << g.node(i) << "," << atom[i] << "\n";
}

// ---------------------------------------------------------------------------
// Partition of unity

/// Smoothstep transition over [lo, hi].
struct Ramp {
    double lo;
    double hi;
    double slope_bound() const { return 1.5 / (hi - lo); }
};

class PartitionBump {
public:
    PartitionBump(Interval host, std::optional<Ramp> rise, std::optional<Ramp> fall)
        : host_(host), rise_(rise), fall_(fall) {}

    const Interval& host() const noexcept { return host_; }
    const std::optional<Ramp>& rise() const noexcept { return rise_; }
    const std::optional<Ramp>& fall() const noexcept { return fall_; }

    double operator()(double x) const {
        double v = 1.0;
        if (rise_) v *= smoothstep((x - rise_->lo) / (rise_->hi - rise_->lo));
        if (fall_) v *= 1.0 - smoothstep((x - fall_->lo) / (fall_->hi - fall_->lo));
        return v;
    }

    double derivative(double x) const {
        if (rise_ && x > rise_->lo && x < rise_->hi) {
            const double w = rise_->hi - rise_->lo;
            return smoothstep_slope((x - rise_->lo) / w) / w;
        }
        if (fall_ && x > fall_->lo && x < fall_->hi) {
            const double w = fall_->hi - fall_->lo;
            return -smoothstep_slope((x - fall_->lo) / w) / w;
        }
        return 0.0;
    }

    /// Closure of {x : bump(x) > 0}.
    Interval support() const {
        return Interval(rise_ ? rise_->lo : 0.0, fall_ ? fall_->hi : HUGE_VAL);
    }

    /// ||bump'||_inf.
    double slope_bound() const {
        return std::max(rise_ ? rise_->slope_bound() : 0.0, fall_ ? fall_->slope_bound() : 0.0);
    }

private:
    Interval host_;
    std::optional<Ramp> rise_;
    std::optional<Ramp> fall_;
};

/// Bumps for the section intervals: each shared endpoint p of neighbors I, J gets
/// a smoothstep crossover on [p - d, p + d], d = (beta - 1) min(|I|, |J|) / 2, which
/// lies in I* and J*. The outer ends of the window get a one-sided ramp of width
/// (beta - 1) |I| / 2, so the bumps sum to 1 on the window.
inline std::vector<PartitionBump> partition_of_unity(const ProperSection& section) {
    const auto intervals = section.as_intervals();
    if (intervals.empty()) throw std::invalid_argument("partition_of_unity: empty section");
    const double spread = section.beta - 1.0;
    if (!(spread > 0.0)) throw std::invalid_argument("partition_of_unity: beta must exceed 1");
    std::vector<PartitionBump> bumps;
    bumps.reserve(intervals.size());
    for (std::size_t k = 0; k < intervals.size(); ++k) {
        const Interval& I = intervals[k];
        std::optional<Ramp> rise;
        std::optional<Ramp> fall;
        if (k > 0) {
            const double d = 0.5 * spread * std::min(I.length(), intervals[k - 1].length());
            rise = Ramp{I.a() - d, I.a() + d};
        } else if (I.a() > 0.0) {
            rise = Ramp{I.a() - std::min(I.a(), 0.5 * spread * I.length()), I.a()};
        }
        if (k + 1 < intervals.size()) {
            const double d = 0.5 * spread * std::min(I.length(), intervals[k + 1].length());
            fall = Ramp{I.b() - d, I.b() + d};
        } else {
            fall = Ramp{I.b(), I.b() + 0.5 * spread * I.length()};
        }
        bumps.emplace_back(I, rise, fall);
    }
    return bumps;
}

// ---------------------------------------------------------------------------
// Maximal functions

namespace detail {

/// K_t f for each time. With V == 0 the exact kernel is applied in one shot;
/// otherwise every time is evolved from 0 on its own, so each slice depends on
/// t alone and not on which other times are requested.
inline std::vector<GridFunction> time_slices(const Potential& V, const GridFunction& f,
                                             std::span<const double> times, const SplittingScheme& scheme) {
    std::vector<GridFunction> out;
    out.reserve(times.size());
    if (V.is_zero()) {
        for (double t : times) out.push_back(heat_apply(HeatKernel(f.grid().alpha(), t), f));
    } else {
        const Semigroup sg(f.grid_ptr(), V, scheme);
        for (double t : times) out.push_back(sg.apply(t, f));
    }
    return out;
}

}  // namespace detail

/// Node-wise max over the times of |K_t f|.
inline GridFunction maximal_function(const Potential& V, const GridFunction& f, std::span<const double> times,
                                     const SplittingScheme& scheme = {}) {
    if (times.empty()) throw std::invalid_argument("maximal_function: empty time grid");
    GridFunction out(f.grid_ptr());
    for (const auto& g : detail::time_slices(V, f, times, scheme)) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], std::abs(g[i]));
    }
    return out;
}

/// Smallest time the grid resolves around the support of f: the kernel width
/// sqrt(t) spans two of the widest cells there.
inline double resolved_time(const GridFunction& f) {
    const Grid& g = f.grid();
    double widest = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (f[i] != 0.0) widest = std::max(widest, g.cell_hi(i) - g.cell_lo(i));
    }
    if (widest == 0.0) throw std::invalid_argument("resolved_time: f vanishes");
    return 4.0 * widest * widest;
}

struct HardyNormReport {
    double norm = 0.0;                 ///< ||sup_{t in grid} |K_t f| ||_{L1(mu_h)}
    double norm_half_range = 0.0;      ///< same with t_max halved
    double norm_double_range = 0.0;    ///< same with t_max doubled
    double norm_double_density = 0.0;  ///< same with twice the times per octave
    double t_min = 0.0;
    double t_max = 0.0;
    int per_octave = 0;
    /// Relative change when the range doubles.
    double range_sensitivity() const { return std::abs(norm_double_range - norm) / std::max(norm, 1e-300); }
    double density_sensitivity() const { return std::abs(norm_double_density - norm) / std::max(norm, 1e-300); }
};

inline HardyNormReport hardy_norm(const Potential& V, const GridFunction& f, double t_min, double t_max,
                                  int per_octave = 16, const SplittingScheme& scheme = {}) {
    if (!(t_min > 0.0) || !(t_max > t_min)) throw std::invalid_argument("hardy_norm: need 0 < t_min < t_max");
    const std::vector<std::vector<double>> grids{
        octave_time_grid(t_min, t_max, per_octave),
        octave_time_grid(t_min, std::max(t_min, 0.5 * t_max), per_octave),
        octave_time_grid(t_min, 2.0 * t_max, per_octave),
        octave_time_grid(t_min, t_max, 2 * per_octave),
    };
    std::set<double> all;
    for (const auto& g : grids) all.insert(g.begin(), g.end());
    const std::vector<double> times(all.begin(), all.end());

    const auto slices = detail::time_slices(V, f, times, scheme);
    auto norm_over = [&](const std::vector<double>& subset) {
        const std::set<double> pick(subset.begin(), subset.end());
        GridFunction m(f.grid_ptr());
        for (std::size_t k = 0; k < times.size(); ++k) {
            if (!pick.contains(times[k])) continue;
            for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::max(m[i], std::abs(slices[k][i]));
        }
        return m.integral();
    };
    HardyNormReport r;
    r.norm = norm_over(grids[0]);
    r.norm_half_range = norm_over(grids[1]);
    r.norm_double_range = norm_over(grids[2]);
    r.norm_double_density = norm_over(grids[3]);
    r.t_min = t_min;
    r.t_max = t_max;
    r.per_octave = per_octave;
    return r;
}

/// Local variant: times up to tau^2.
inline HardyNormReport local_hardy_norm(const Potential& V, const GridFunction& f, double tau, double t_min,
                                        int per_octave = 16, const SplittingScheme& scheme = {}) {
    return hardy_norm(V, f, t_min, tau * tau, per_octave, scheme);
}

// ---------------------------------------------------------------------------
// Re-supporting a mu-atom on the scale of a host interval I

/// psi == 1 on I*, psi == 0 outside I**, |psi'| <= C / |I|.
struct Cutoff {
    Interval host;
    double beta;
    std::function<double(double)> profile;
    double derivative_constant;

    double operator()(double x) const { return profile(x); }
    Interval inner() const { return enlarge(host, beta).support; }
    Interval outer() const { return enlarge(host, beta * beta).support; }
};

/// Smoothstep ramps from the ends of I* to the ends of I**. Where I** is cut off
/// at 0 the cutoff stays 1 down to 0.
inline Cutoff smoothstep_cutoff(const Interval& I, double beta) {
    if (!(beta > 1.0)) throw std::invalid_argument("smoothstep_cutoff: beta must exceed 1");
    const Interval in = enlarge(I, beta).support;
    const Interval out = enlarge(I, beta * beta).support;
    auto profile = [in, out](double x) {
        if (x >= in.a() && x <= in.b()) return 1.0;
        if (x > in.b()) return 1.0 - smoothstep((x - in.b()) / (out.b() - in.b()));
        if (out.a() <= 0.0) return 1.0;
        return smoothstep((x - out.a()) / (in.a() - out.a()));
    };
    double widest_slope = 1.5 / (out.b() - in.b());
    if (out.a() > 0.0) widest_slope = std::max(widest_slope, 1.5 / (in.a() - out.a()));
    return Cutoff{I, beta, profile, widest_slope * I.length()};
}

/// Checks the cutoff envelope on the grid nodes; throws CutoffViolation.
inline void check_cutoff(const Grid& g, const Cutoff& psi) {
    const Interval in = psi.inner();
    const Interval out = psi.outer();
    const double bound = psi.derivative_constant / psi.host.length();
    double prev_x = 0.0, prev_v = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.node(i);
        const double v = psi(x);
        std::ostringstream os;
        os << "cutoff at x = " << x << ": ";
        if (!(v >= 0.0 && v <= 1.0)) throw CutoffViolation(os.str() + "value outside [0, 1]");
        if (in.contains(x) && v != 1.0) throw CutoffViolation(os.str() + "not 1 on I*");
        if (!out.contains(x) && v != 0.0) throw CutoffViolation(os.str() + "not 0 outside I**");
        if (i > 0 && std::abs(v - prev_v) > bound * (x - prev_x) * (1.0 + 1e-9) + 1e-15) {
            throw CutoffViolation(os.str() + "slope exceeds C / |I|");
        }
        prev_x = x;
        prev_v = v;
    }
}

struct ResupportResult {
    std::vector<WeightedAtom> terms;
    double lambda = 0.0;           ///< \int psi a dmu_h
    int N = -1;                    ///< chain depth; -1 when no chain was built
    std::vector<Interval> chain;   ///< K = I_0 subset ... subset I_N
};

/// Writes psi a as a finite sum of lambda_j times atoms on the scale of I: mean-zero
/// atoms supported in I**, plus lambda times the local atom on I. Telescopes
/// the mass of psi a through a doubling chain from K = I** cap J up to I.
inline ResupportResult resupport_atom(const Atom& a, const Interval& I, const Cutoff& psi, double C0 = 0.0) {
    if (a.kind() != AtomKind::Mu) throw std::invalid_argument("resupport_atom: expects a mu-atom");
    const GridPtr& grid = a.grid_ptr();
    check_cutoff(*grid, psi);
    const double beta = psi.beta;
    if (C0 <= 0.0) C0 = beta * beta;
    const Interval& J = a.support();
    const Interval inner = psi.inner();
    const Interval outer = psi.outer();

    ResupportResult r;
    if (J.a() >= inner.a() && J.b() <= inner.b()) {
        r.terms.push_back({1.0, a});
        r.lambda = a.values().integral();
        return r;
    }
    const auto K_opt = J.intersect(outer);
    GridFunction psi_a(grid);
    for (std::size_t i = 0; i < psi_a.size(); ++i) {
        if (a[i] != 0.0) psi_a[i] = psi(grid->node(i)) * a[i];
    }
    if (!K_opt || K_opt->length() <= 0.0 || psi_a.sup_norm() == 0.0) return r;
    const Interval K = *K_opt;

    const double lambda = psi_a.integral();
    r.lambda = lambda;
    r.N = static_cast<int>(std::floor(std::log2(C0 * I.length() / K.length())));
    r.N = std::max(r.N, 0);

    r.chain.push_back(K);
    for (int j = 1; j <= r.N; ++j) {
        const Interval& prev = r.chain.back();
        const double len = std::min(2.0 * prev.length(), outer.length());
        const double lo = std::max(outer.a(), std::min(prev.center() - 0.5 * len, outer.b() - len));
        r.chain.emplace_back(lo, lo + len);
    }

    auto normalized_indicator = [&](const Interval& S) {
        GridFunction v = indicator(grid, S);
        v *= 1.0 / grid->mass(S.a(), S.b());
        return v;
    };
    // Terms at rounding level of their inputs are zero; this happens when a
    // chain interval holds a single node.
    auto emit = [&](const Interval& support, GridFunction b, double scale) {
        if (b.sup_norm() <= 1e-13 * scale) return;
        auto [lam, atom] = Atom::normalize(AtomKind::Cancellative, support, std::move(b), I, beta);
        r.terms.push_back({lam, std::move(atom)});
    };

    const GridFunction mean_K = normalized_indicator(K);
    emit(K, psi_a - lambda * mean_K, psi_a.sup_norm() + std::abs(lambda) * mean_K.sup_norm());
    if (lambda != 0.0) {
        for (int j = 1; j <= r.N; ++j) {
            const GridFunction prev = normalized_indicator(r.chain[j - 1]);
            emit(r.chain[j], lambda * (prev - normalized_indicator(r.chain[j])), std::abs(lambda) * prev.sup_norm());
        }
        const Interval& top = r.chain.back();
        const Interval hull(std::min(top.a(), I.a()), std::max(top.b(), I.b()));
        const GridFunction top_mean = normalized_indicator(top);
        emit(hull, lambda * (top_mean - normalized_indicator(I)), std::abs(lambda) * top_mean.sup_norm());
        r.terms.push_back({lambda, Atom::make_local(grid, I)});
    }
    return r;
}

}  // namespace besselh
