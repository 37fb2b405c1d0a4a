#pragma once

// Superharmonic profiles built on balanced intervals, and numerical checks of
// the large-time decay (D) and small-time smallness (K) of the Schrodinger
// kernel relative to a section interval.
//
// For a host interval I the profile is
//
//   phi(x) = 1 + 1/(2(1 - alpha)) \int_J V(y) |x^{1-alpha} - y^{1-alpha}| dmu(y)
//
// where J sits between 2I and 2 parent(I) and satisfies |J|^2 / mu(J) \int_J V dmu = 1.
// It solves -phi'' - (alpha/x) phi' = -1_J V with x^alpha phi'(x) -> -c/2 at 0,
// c = \int_J V dmu, which makes it a supersolution of B + V.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "besselh/error.hpp"
#include "besselh/grid.hpp"
#include "besselh/kernel.hpp"
#include "besselh/measure.hpp"
#include "besselh/quadrature.hpp"
#include "besselh/section.hpp"
#include "besselh/semigroup.hpp"

namespace besselh {

struct SuperharmonicProfile {
    double alpha;
    DyadicInterval host;
    Interval J;
    double length;            ///< |J| under the chosen convention
    double c_J;               ///< mu(J) / |J|^2
    double potential_mass;    ///< \int_J V dmu; equals c_J when balanced
    double balance_residual;  ///< | |J|^2 / mu(J) \int_J V dmu - 1 |
    double parameter;         ///< position s in [0, 1] along the family from 2I to 2 parent(I)
    Potential V;
};

/// Bisection along J(s) = (1 - s) 2I + s 2I^d (endpoints and lengths interpolated
/// linearly) for the balance |J|^2 / mu(J) \int_J V dmu = 1. With both lengths read
/// in `convention`, the balance at s = 0 and s = 1 equals F(I) and F(I^d).
inline SuperharmonicProfile find_balanced_J(const WeightedMeasure& m, const Potential& V, const DyadicInterval& I,
                                            LengthConvention convention = LengthConvention::Nominal,
                                            double tolerance = 1e-10) {
    const double alpha = m.alpha();
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("find_balanced_J: needs alpha in (0, 1)");
    const Ball inner = enlarge(I.interval(), 2.0);
    const Ball outer = enlarge(I.parent().interval(), 2.0);
    auto family = [&](double s) {
        return Interval((1 - s) * inner.support.a() + s * outer.support.a(),
                        (1 - s) * inner.support.b() + s * outer.support.b());
    };
    auto length = [&](double s) { return (1 - s) * inner.length(convention) + s * outer.length(convention); };
    auto balance = [&](double s) {
        const Interval J = family(s);
        const double L = length(s);
        return L * L / m.mass(J.a(), J.b()) * V.integral(J.a(), J.b());
    };
    const double top = balance(1.0);
    if (!(top > 1.0)) {
        std::ostringstream os;
        os << "find_balanced_J: balance on 2 parent(" << I.to_string() << ") is " << top << " <= 1";
        throw BalanceUnreachable(os.str());
    }
    if (balance(0.0) > 1.0 + 1e-12) {
        throw BalanceUnreachable("find_balanced_J: F(" + I.to_string() + ") > 1, not a section interval");
    }
    double lo = 0.0, hi = 1.0, s = 0.0, b = balance(0.0);
    for (int it = 0; it < 200 && std::abs(b - 1.0) >= tolerance; ++it) {
        s = 0.5 * (lo + hi);
        b = balance(s);
        (b > 1.0 ? hi : lo) = s;
        if (hi - lo < 1e-17) break;
    }
    const Interval J = family(s);
    const double L = length(s);
    return SuperharmonicProfile{alpha,
                                I,
                                J,
                                L,
                                m.mass(J.a(), J.b()) / (L * L),
                                V.integral(J.a(), J.b()),
                                std::abs(b - 1.0),
                                s,
                                V};
}

struct PhiValue {
    double value;
    double derivative;
};

/// phi and phi' in closed form from the moments of V on J.
inline PhiValue phi_eval(const SuperharmonicProfile& p, double x) {
    if (!(x > 0.0)) throw std::invalid_argument("phi_eval: x must be positive");
    const double a = p.J.a(), b = p.J.b();
    const double xc = std::clamp(x, a, b);
    const double below = p.V.moment(a, xc, p.alpha);  // \int_{J, y < x} V dmu
    const double above = p.V.moment(xc, b, p.alpha);
    const double first_below = p.V.moment(a, xc, 1.0);
    const double first_above = p.V.moment(xc, b, 1.0);
    const double xp = std::pow(x, 1.0 - p.alpha);
    const double integral = xp * (below - above) - (first_below - first_above);
    return {1.0 + integral / (2.0 * (1.0 - p.alpha)), 0.5 * std::pow(x, -p.alpha) * (below - above)};
}

/// A compactly supported test function with its derivative.
struct TestFunction {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    Interval support;
    std::vector<double> kinks{};
};

struct WeakResidual {
    double residual;
    double tolerance;
    double gradient_term;   ///< \int psi' phi' dmu
    double potential_term;  ///< \int psi 1_J V dmu
    double boundary_term;   ///< psi(0) c / 2, c = \int_J V dmu
};

namespace detail {

/// Sum of tanh-sinh integrals over the panels between consecutive points.
template <class F>
QuadratureResult panel_integral(F&& f, std::vector<double> points, double rel_tol) {
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    boost::math::quadrature::tanh_sinh<double> rule;
    QuadratureResult total;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        double err = 0.0, l1 = 0.0;
        total.value += rule.integrate(f, points[i], points[i + 1], rel_tol, &err, &l1);
        total.error += err;
    }
    return total;
}

}  // namespace detail

/// Residual of the weak form  \int psi' phi' dmu + \int psi 1_J V dmu - psi(0) c / 2 = 0.
/// With `boundary_term` false the last term is left out.
inline WeakResidual phi_equation_residual(const SuperharmonicProfile& p, const TestFunction& psi,
                                          bool boundary_term = true) {
    const double a = p.J.a(), b = p.J.b();
    const double lo = psi.support.a(), hi = psi.support.b();
    std::vector<double> points{lo, hi};
    for (double k : psi.kinks)
        if (k > lo && k < hi) points.push_back(k);
    auto inside = [&](double x) { return x > lo && x < hi; };
    if (inside(a)) points.push_back(a);
    if (inside(b)) points.push_back(b);
    for (double k : p.V.breakpoints())
        if (inside(k)) points.push_back(k);

    // x^alpha phi'(x) = (1/2)(\int_{J,y<x} V dmu - \int_{J,y>x} V dmu) is bounded, so the
    // gradient term needs no weight.
    auto gradient = [&](double x) {
        const double xc = std::clamp(x, a, b);
        return psi.derivative(x) * 0.5 * (p.V.moment(a, xc, p.alpha) - p.V.moment(xc, b, p.alpha));
    };
    const auto grad = detail::panel_integral(gradient, points, 1e-13);

    std::vector<double> jpoints;
    for (double x : points)
        if (x >= a && x <= b) jpoints.push_back(x);
    const double jlo = std::max(a, lo), jhi = std::min(b, hi);
    QuadratureResult pot;
    if (jhi > jlo) {
        jpoints.push_back(jlo);
        jpoints.push_back(jhi);
        pot = detail::panel_integral([&](double x) { return psi.value(x) * p.V(x) * std::pow(x, p.alpha); },
                                     jpoints, 1e-13);
    }
    const double bdry = boundary_term ? 0.5 * psi.value(0.0) * p.potential_mass : 0.0;
    const double scale = std::abs(grad.value) + std::abs(pot.value) + std::abs(bdry);
    return {std::abs(grad.value + pot.value - bdry), grad.error + pot.error + 1e-12 * scale, grad.value, pot.value,
            bdry};
}

// ---------------------------------------------------------------------------
// Evolution checks

/// Graded grid for kernel evolutions around I up to time t_max: spacing |I|/32
/// (dyadic) up to I** plus |I|, then cells growing 5% per cell up to a reach of
/// 14 sqrt(t_max) past I.
inline GridPtr condition_grid(double alpha, const Interval& I, double t_max, double beta = 1.05) {
    const double h = dyadic_spacing(I.length() / 32.0);
    const double fine_end = enlarge(I, beta * beta).support.b() + I.length();
    const double x_max = std::max(fine_end + 4.0 * I.length(), I.b() + 14.0 * std::sqrt(t_max));
    const double max_cell = std::max(h, 0.25 * std::sqrt(t_max));
    return make_graded_grid(alpha, h, fine_end, x_max, 1.05, max_cell);
}

/// Time steps scale with the time itself: each segment takes `steps` equal steps.
inline SplittingScheme scale_free_scheme(int steps = 16) { return SplittingScheme{HUGE_VAL, steps, 40.0}; }

/// Total mass \int K_t(z, x) dmu(x) of the kernel column at the node nearest z.
inline std::vector<double> theta_masses(const Semigroup& sg, double z, std::span<const double> times) {
    const std::size_t j = sg.grid().nearest_node(z);
    std::vector<double> out;
    for (const auto& col : sg.evolve(sg.point_mass(j), times)) out.push_back(col.integral());
    return out;
}

inline double theta_mass(const Potential& V, double z, double t, const GridPtr& grid,
                         const SplittingScheme& scheme = {}) {
    const Semigroup sg(grid, V, scheme);
    return theta_masses(sg, z, std::vector<double>{t}).front();
}

struct SuperharmonicReport {
    double z = 0.0;  ///< node actually used
    double phi_z = 0.0;
    std::vector<double> times;
    std::vector<double> theta;        ///< K_u phi(z)
    double truncation_error = 0.0;    ///< bound on the part of K_u phi(z) beyond the grid
    double slack = 1e-6;
    double worst_increase = 0.0;      ///< max theta(u_{k+1}) / theta(u_k) - 1
    double worst_excess = 0.0;        ///< max theta(u) / phi(z) - 1
    double witness_time = 0.0;        ///< time of the worst increase
    bool monotone = false;
    bool bounded = false;
    bool ok() const noexcept { return monotone && bounded; }
};

/// theta(u) = K_u phi(z) for u on the time grid, from evolving phi (cut off at
/// the end of the grid). The cut-off part is bounded with the exact heat kernel,
/// since K_u <= P_u.
inline SuperharmonicReport check_superharmonic(const SuperharmonicProfile& p, double z,
                                               std::span<const double> times, const GridPtr& grid,
                                               const SplittingScheme& scheme = scale_free_scheme(),
                                               double slack = 1e-6) {
    SuperharmonicReport r;
    const std::size_t j = grid->nearest_node(z);
    r.z = grid->node(j);
    r.phi_z = phi_eval(p, r.z).value;
    r.slack = slack;
    r.times.assign(times.begin(), times.end());
    const auto phi = GridFunction::sample(grid, [&](double x) { return phi_eval(p, x).value; });
    const Semigroup sg(grid, p.V, scheme);
    for (const auto& g : sg.evolve(phi, times)) r.theta.push_back(g[j]);

    const double edge = grid->x_max();
    const WeightedIntegrator integrator(p.alpha);
    for (double u : times) {
        const double reach = r.z + gaussian_radius(u);
        if (reach <= edge) continue;
        const HeatKernel k(p.alpha, u);
        const auto tail = integrator.integrate([&](double x) { return k(r.z, x) * phi_eval(p, x).value; }, edge,
                                               reach, {}, 1e-8, 0.0);
        r.truncation_error = std::max(r.truncation_error, tail.value);
    }

    r.worst_increase = -HUGE_VAL;
    for (std::size_t k = 1; k < r.theta.size(); ++k) {
        const double inc = r.theta[k] / r.theta[k - 1] - 1.0;
        if (inc > r.worst_increase) {
            r.worst_increase = inc;
            r.witness_time = r.times[k];
        }
    }
    r.monotone = r.worst_increase <= slack;
    r.worst_excess = -HUGE_VAL;
    for (double th : r.theta) r.worst_excess = std::max(r.worst_excess, th / r.phi_z - 1.0);
    r.bounded = r.worst_excess <= slack;
    return r;
}

// ---------------------------------------------------------------------------
// Decay fits

struct DecayPoint {
    double x;
    double value;
};

struct DecayFitReport {
    std::string label;
    std::vector<DecayPoint> data;
    double exponent = 0.0;   ///< fitted slope
    double constant = 0.0;   ///< fitted prefactor
    double threshold = 0.0;  ///< the exponent must be <= (D) or >= (K) this
    bool pass = false;
    /// Weak polynomial form M(n) <= C n^{-1-epsilon} implied by the data (condition D only).
    double weak_epsilon = std::numeric_limits<double>::quiet_NaN();
    double weak_constant = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

struct LineFit {
    double slope;
    double intercept;
};

inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

inline std::string interval_label(const Interval& I) {
    std::ostringstream os;
    os.precision(12);
    os << "[" << I.a() << "," << I.b() << "]";
    return os.str();
}

}  // namespace detail

/// M(n) = \int K_{2^n |I|^2}(x, y) dmu(x) for n = 0..n_max, fitted as log2 M(n) ~ slope n
/// over the last half of the range. Passes when slope <= -(1 - alpha)/2 + 0.1.
inline DecayFitReport check_condition_D(const Potential& V, const Interval& I, double y, int n_max,
                                        const GridPtr& grid, const SplittingScheme& scheme = scale_free_scheme()) {
    if (n_max < 2) throw std::invalid_argument("check_condition_D: n_max must be >= 2");
    const double alpha = grid->alpha();
    const double L2 = I.length() * I.length();
    std::vector<double> times;
    for (int n = 0; n <= n_max; ++n) times.push_back(std::ldexp(L2, n));
    const Semigroup sg(grid, V, scheme);
    const auto mass = theta_masses(sg, y, times);

    DecayFitReport r;
    r.label = detail::interval_label(I);
    r.threshold = -(1.0 - alpha) / 2.0 + 0.1;
    for (int n = 0; n <= n_max; ++n) r.data.push_back({static_cast<double>(n), mass[static_cast<std::size_t>(n)]});

    std::vector<double> xs, ys;
    for (int n = n_max / 2; n <= n_max; ++n) {
        const double v = mass[static_cast<std::size_t>(n)];
        if (v > 0.0) {
            xs.push_back(n);
            ys.push_back(std::log2(v));
        }
    }
    if (xs.size() < 2) {
        r.exponent = -HUGE_VAL;
        r.constant = 0.0;
    } else {
        const auto fit = detail::least_squares(xs, ys);
        r.exponent = fit.slope;
        r.constant = std::exp2(fit.intercept);
    }
    r.pass = r.exponent <= r.threshold;

    // Weak form: slope of ln M against ln n over n >= 1, last half.
    std::vector<double> lx, ly;
    for (int n = std::max(1, n_max / 2); n <= n_max; ++n) {
        const double v = mass[static_cast<std::size_t>(n)];
        if (v > 0.0) {
            lx.push_back(std::log(n));
            ly.push_back(std::log(v));
        }
    }
    if (lx.size() >= 2) {
        r.weak_epsilon = -detail::least_squares(lx, ly).slope - 1.0;
        double C = 0.0;
        for (int n = 1; n <= n_max; ++n) {
            C = std::max(C, mass[static_cast<std::size_t>(n)] * std::pow(n, 1.0 + r.weak_epsilon));
        }
        r.weak_constant = C;
    }
    return r;
}

struct ConditionKOptions {
    int k_max = 10;        ///< t / |I|^2 runs over 2^{-k}, k = 0..k_max
    double beta = 1.05;
    double rel_tol = 1e-8;
};

namespace detail {

/// \int_{support of W} P_s(x, y) W(y) dmu(y), W = V 1_{I***}.
inline double potential_heat(const Potential& W, const Interval& S, double x, double s, double rel_tol) {
    const HeatKernel k(W.alpha(), s);
    const double R = gaussian_radius(s);
    const double lo = std::max(S.a(), x - R), hi = std::min(S.b(), x + R);
    if (!(hi > lo)) return 0.0;
    std::vector<double> points{lo, hi};
    if (x > lo && x < hi) points.push_back(x);
    for (double b : W.breakpoints())
        if (b > lo && b < hi) points.push_back(b);
    const double alpha = W.alpha();
    return panel_integral([&](double y) { return k(x, y) * W(y) * std::pow(y, alpha); }, points, rel_tol).value;
}

}  // namespace detail

/// G(t) = sup_x \int_0^{2t} \int P_s(x, y) 1_{I***}(y) V(y) dmu(y) ds with the exact kernel,
/// for t = 2^{-k} |I|^2, fitted as G ~ C (t/|I|^2)^delta over the smaller half of the
/// times. Near the origin (dist(0, I) <= 2|I|) the bar is delta >= (1 - alpha)/2 - 0.1,
/// elsewhere delta >= 1/2 - 0.1.
inline DecayFitReport check_condition_K(const Potential& V, const Interval& I, const ConditionKOptions& opt = {}) {
    const double alpha = V.alpha();
    const Interval S = enlarge(I, opt.beta * opt.beta * opt.beta).support;
    const Potential W = V.restricted(S);
    DecayFitReport r;
    r.label = detail::interval_label(I);
    const bool near_origin = I.a() <= 2.0 * I.length();
    r.threshold = near_origin ? (1.0 - alpha) / 2.0 - 0.1 : 0.5 - 0.1;

    // Points where the sup is sought: across I*** and its neighborhood, plus a
    // geometric approach to 0 when I*** reaches it.
    std::vector<double> xs;
    const double span_lo = std::max(0.0, S.a() - I.length()), span_hi = S.b() + I.length();
    for (int i = 1; i < 24; ++i) xs.push_back(span_lo + (span_hi - span_lo) * i / 24.0);
    if (S.a() <= 0.0) {
        for (int i = 1; i <= 12; ++i) xs.push_back(std::ldexp(I.length(), -i));
    }

    const double L2 = I.length() * I.length();
    for (int k = 0; k <= opt.k_max; ++k) {
        const double t = std::ldexp(L2, -k);
        double G = 0.0;
        if (!W.is_zero()) {
            for (double x : xs) {
                // s = u^2 smooths the s^{-1/2}-type behavior at s = 0.
                auto integrand = [&](double u) {
                    return u > 0.0 ? 2.0 * u * detail::potential_heat(W, S, x, u * u, opt.rel_tol) : 0.0;
                };
                const auto q = adaptive_integrate(integrand, 0.0, std::sqrt(2.0 * t), opt.rel_tol * 10.0, 12);
                G = std::max(G, q.value);
            }
        }
        r.data.push_back({t / L2, G});
    }

    std::vector<double> lx, ly;
    for (std::size_t i = r.data.size() / 2; i < r.data.size(); ++i) {
        if (r.data[i].value > 0.0) {
            lx.push_back(std::log(r.data[i].x));
            ly.push_back(std::log(r.data[i].value));
        }
    }
    if (lx.size() < 2) {
        r.exponent = HUGE_VAL;  // G == 0: nothing to bound
        r.constant = 0.0;
    } else {
        const auto fit = detail::least_squares(lx, ly);
        r.exponent = fit.slope;
        r.constant = std::exp(fit.intercept);
    }
    r.pass = r.exponent >= r.threshold;
    return r;
}

/// Evenly spread indices into the section, always including the first interval.
inline std::vector<DyadicInterval> sample_intervals(const ProperSection& s, int count) {
    std::vector<DyadicInterval> out;
    const auto n = static_cast<int>(s.intervals.size());
    if (count >= n) return s.intervals;
    for (int i = 0; i < count; ++i) {
        const int idx = count == 1 ? 0 : i * (n - 1) / (count - 1);
        out.push_back(s.intervals[static_cast<std::size_t>(idx)]);
    }
    return out;
}

}  // namespace besselh
