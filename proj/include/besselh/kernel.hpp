#pragma once

// Heat kernel of the Bessel operator -f'' - (alpha/x) f' on L^2(x^alpha dx):
//
//   P_t(x, y) = (2t)^{-1} (xy)^{-nu} exp(-(x^2 + y^2) / 4t) I_nu(xy / 2t),  nu = (alpha - 1) / 2,
//
// assembled as (2t)^{-1} (4t)^{-nu} exp(-(x - y)^2 / 4t) G(xy / 2t) with the
// bounded factor G(z) = e^{-z} I_nu(z) (z/2)^{-nu}, so nothing overflows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "besselh/bessel.hpp"
#include "besselh/grid.hpp"
#include "besselh/measure.hpp"
#include "besselh/quadrature.hpp"

namespace besselh {

class HeatKernel {
public:
    HeatKernel(double alpha, double t) : alpha_(alpha), t_(t), order_(0.5 * (alpha - 1.0)) {
        if (!(alpha > 0.0)) throw std::invalid_argument("HeatKernel: alpha must be positive");
        if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("HeatKernel: t must be positive");
        log_prefactor_ = -std::log(2.0 * t) - order_ * std::log(4.0 * t);
    }

    double alpha() const noexcept { return alpha_; }
    double t() const noexcept { return t_; }
    double bessel_order() const noexcept { return order_; }

    double log_value(double x, double y) const {
        const double d = x - y;
        return log_prefactor_ - d * d / (4.0 * t_) + log_reduced_bessel(order_, x * y / (2.0 * t_));
    }

    double operator()(double x, double y) const { return std::exp(log_value(x, y)); }

    /// d/dx log P_t(x, y).
    double dlog_dx(double x, double y) const {
        return -(x - y) / (2.0 * t_) + y / (2.0 * t_) * log_reduced_bessel_derivative(order_, x * y / (2.0 * t_));
    }

    /// Limit of P_t(x, y) as x, y -> 0.
    double at_origin() const { return std::exp(log_prefactor_ - std::lgamma(order_ + 1.0)); }

private:
    double alpha_;
    double t_;
    double order_;
    double log_prefactor_;
};

inline double heat_kernel(const HeatKernel& k, double x, double y) { return k(x, y); }

struct MassResidual {
    double residual;            ///< |\int P_t(x, y) dmu(x) - 1|
    double mass;
    double truncation_radius;   ///< integration covers [max(0, y - R), y + R]
    double error_estimate;
    bool converged;
};

/// Distance beyond which the Gaussian factor drops below 1e-19 of its peak.
inline double gaussian_radius(double t) { return 13.4 * std::sqrt(t); }

inline MassResidual heat_kernel_mass_residual(const HeatKernel& k, double y, double quad_tolerance = 1e-10) {
    if (!(quad_tolerance > 0.0)) throw std::invalid_argument("mass residual: tolerance must be positive");
    const double radius = gaussian_radius(k.t());
    const double lo = std::max(0.0, y - radius);
    const double hi = y + radius;
    const WeightedIntegrator integrator(k.alpha());
    auto f = [&](double x) { return k(x, y); };
    const double rel = std::min(quad_tolerance * 1e-2, 1e-11);
    const auto r = integrator.integrate(f, lo, hi, {y}, rel, std::min(hi, 2.0 * std::sqrt(k.t())));
    const double residual = std::abs(r.value - 1.0);
    return {residual, r.value, radius, r.error, r.converged && r.error <= quad_tolerance};
}

struct KernelSample {
    double x, y, t;
};

struct GaussianSampleSpec {
    double x_lo = 1e-3, x_hi = 1e3;
    double t_lo = 1e-3, t_hi = 1e3;
    int samples = 10000;
    std::uint64_t seed = 1;
    std::vector<double> lower_rates{1.0, 1.5, 2.0, 2.5, 3.0, 3.5};
    std::vector<double> upper_rates{4.5, 5.0, 6.0, 8.0, 10.0, 12.0, 16.0};
    /// When nonempty, these points are used instead of random draws.
    std::vector<KernelSample> points{};
};

/// Two-sided Gaussian bound
///   C^{-1} mu(B(x, sqrt t))^{-1} e^{-|x-y|^2 / (c1 t)} <= P_t(x, y) <= C mu(B(x, sqrt t))^{-1} e^{-|x-y|^2 / (c2 t)}
/// with c1 < 4 < c2, and the derivative bound
///   |d/dx P_t(x, y)| <= C_d t^{-1/2} mu(B(x, sqrt t))^{-1} e^{-|x-y|^2 / (c_d t)}.
struct GaussianBoundReport {
    double C = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double C_derivative = 0.0;
    double c_derivative = 0.0;
    int samples = 0;
    KernelSample upper_witness{};
    KernelSample lower_witness{};
    KernelSample derivative_witness{};
    GaussianSampleSpec spec;
    /// Every sample satisfies the fitted bounds with finite constants.
    bool holds = false;
};

namespace detail {

inline double log_ball_mass(const WeightedMeasure& m, double x, double r) {
    const Interval b = ball(x, r).support;
    return std::log(m.mass(b.a(), b.b()));
}

}  // namespace detail

inline GaussianBoundReport gaussian_bound_constants(const WeightedMeasure& m, const GaussianSampleSpec& spec) {
    if (!(spec.x_lo > 0.0 && spec.x_hi > spec.x_lo && spec.t_lo > 0.0 && spec.t_hi >= spec.t_lo)) {
        throw std::invalid_argument("gaussian_bound_constants: invalid sample ranges");
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, unit(rng)); };

    struct Row {
        KernelSample s;
        double log_scaled;   // log(P mu(B))
        double log_dscaled;  // log(|dP/dx| sqrt(t) mu(B))
        double gauss;        // |x-y|^2 / t
    };
    std::vector<Row> rows;
    const int count = spec.points.empty() ? spec.samples : static_cast<int>(spec.points.size());
    rows.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        double x, y, t;
        if (!spec.points.empty()) {
            x = spec.points[i].x;
            y = spec.points[i].y;
            t = spec.points[i].t;
            if (!(x > 0.0 && y > 0.0 && t > 0.0)) throw std::invalid_argument("gaussian_bound_constants: bad point");
        } else {
            x = log_uniform(spec.x_lo, spec.x_hi);
            // Half the samples put y near x so the near-diagonal regime is well covered.
            t = log_uniform(spec.t_lo, spec.t_hi);
            y = (i % 2 == 0) ? log_uniform(spec.x_lo, spec.x_hi) : std::abs(x + std::sqrt(t) * 6.0 * (unit(rng) - 0.5));
            if (y <= 0.0) y = spec.x_lo;
        }
        const HeatKernel k(m.alpha(), t);
        const double logp = k.log_value(x, y);
        const double logmu = detail::log_ball_mass(m, x, std::sqrt(t));
        // Centered difference of log P; the step resolves both the x and the sqrt(t) scales.
        const double h = 1e-5 * std::min(x, std::sqrt(t));
        const double dlog = (k.log_value(x + h, y) - k.log_value(x - h, y)) / (2.0 * h);
        const double d = x - y;
        rows.push_back({{x, y, t}, logp + logmu, std::log(std::abs(dlog)) + logp + 0.5 * std::log(t) + logmu,
                        d * d / t});
    }

    GaussianBoundReport report;
    report.spec = spec;
    report.samples = count;

    auto upper_log_constant = [&](double rate, KernelSample* witness, bool derivative) {
        double worst = -HUGE_VAL;
        for (const auto& r : rows) {
            const double v = (derivative ? r.log_dscaled : r.log_scaled) + r.gauss / rate;
            if (v > worst) {
                worst = v;
                if (witness) *witness = r.s;
            }
        }
        return worst;
    };
    auto lower_log_constant = [&](double rate, KernelSample* witness) {
        double worst = -HUGE_VAL;
        for (const auto& r : rows) {
            const double v = -(r.log_scaled + r.gauss / rate);
            if (v > worst) {
                worst = v;
                if (witness) *witness = r.s;
            }
        }
        return worst;
    };

    std::vector<double> up, low;
    for (double c : spec.upper_rates) up.push_back(upper_log_constant(c, nullptr, false));
    for (double c : spec.lower_rates) low.push_back(lower_log_constant(c, nullptr));
    const double best_up = *std::min_element(up.begin(), up.end());
    const double best_low = *std::min_element(low.begin(), low.end());
    const double log_c = std::max({best_up, best_low, 0.0});
    // Rates closest to 4 that still achieve the optimal constant.
    report.c2 = spec.upper_rates.back();
    for (std::size_t i = 0; i < up.size(); ++i) {
        if (up[i] <= log_c) {
            report.c2 = spec.upper_rates[i];
            break;
        }
    }
    report.c1 = spec.lower_rates.front();
    for (std::size_t i = low.size(); i-- > 0;) {
        if (low[i] <= log_c) {
            report.c1 = spec.lower_rates[i];
            break;
        }
    }
    report.C = std::exp(log_c);
    upper_log_constant(report.c2, &report.upper_witness, false);
    lower_log_constant(report.c1, &report.lower_witness);

    report.c_derivative = report.c2;
    report.C_derivative = std::max(1.0, std::exp(upper_log_constant(report.c2, &report.derivative_witness, true)));
    report.holds = std::isfinite(report.C) && std::isfinite(report.C_derivative) && report.c1 < 4.0 &&
                   report.c2 > 4.0;
    return report;
}

/// out(x_i) = sum_j P_t(x_i, x_j) f(x_j) w_j, the quadrature of \int P_t(x, y) f(y) dmu(y)
/// against the exact kernel at every node. Pairs with (x - y)^2 / 4t > 46, where the
/// Gaussian factor is below 1e-20, are skipped.
inline GridFunction heat_apply(const HeatKernel& k, const GridFunction& f) {
    const Grid& g = f.grid();
    const auto x = g.nodes();
    const double reach = std::sqrt(4.0 * k.t() * 46.0);
    std::vector<double> out(g.size(), 0.0);
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double fj = f[j];
        if (fj == 0.0) continue;
        const double wf = fj * g.weight(j);
        const double yj = x[j];
        auto i = static_cast<std::size_t>(std::lower_bound(x.begin(), x.end(), yj - reach) - x.begin());
        for (; i < x.size() && x[i] <= yj + reach; ++i) out[i] += k(x[i], yj) * wf;
    }
    return GridFunction(f.grid_ptr(), std::move(out));
}

inline GridFunction heat_apply(const WeightedMeasure& m, double t, const GridFunction& f) {
    return heat_apply(HeatKernel(m.alpha(), t), f);
}

}  // namespace besselh
