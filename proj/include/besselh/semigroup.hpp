#pragma once

// The Schrodinger semigroup K_t = exp(-t(B + V)) on a grid, by Strang splitting
//
//   v <- e^{-dt V/2} P_dt e^{-dt V/2} v
//
// with the exact heat kernel as the kinetic factor, plus a Feynman-Kac Monte Carlo
// estimator over exact squared-Bessel transitions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <vector>

#include <boost/random/non_central_chi_squared_distribution.hpp>

#include "besselh/error.hpp"
#include "besselh/grid.hpp"
#include "besselh/kernel.hpp"
#include "besselh/measure.hpp"
#include "besselh/quadrature.hpp"

namespace besselh {

/// Banded Nystrom matrix of the heat kernel for one time step, balanced so that
/// mass is conserved:
///   A_ij = d_i P_dt(x_i, x_j) d_j w_j,   sum_i w_i A_ij = w_j (1 - tail_j),
/// where tail_j is the exact kernel mass beyond the last grid edge. The scaling d
/// comes from symmetric Sinkhorn iteration; it corrects the quadrature error of the
/// one-point rule where the grid is graded or under-resolves the kernel. A is
/// symmetric in the weighted inner product, nonnegative and an L1(mu) contraction.
/// Entries with (x_i - x_j)^2 / 4dt above the cutoff are dropped.
class KineticPropagator {
public:
    KineticPropagator(const Grid& grid, double dt, double band_cutoff = 40.0) : dt_(dt) {
        const HeatKernel kernel(grid.alpha(), dt);
        const std::size_t n = grid.size();
        const auto x = grid.nodes();
        const auto w = grid.weights();
        const double reach = std::sqrt(4.0 * dt * band_cutoff);
        first_.resize(n);
        offset_.resize(n + 1);
        offset_[0] = 0;
        std::size_t lo = 0;
        std::size_t hi = 0;
        for (std::size_t i = 0; i < n; ++i) {
            while (x[lo] < x[i] - reach) ++lo;
            while (hi < n && x[hi] <= x[i] + reach) ++hi;
            first_[i] = lo;
            offset_[i + 1] = offset_[i] + (hi - lo);
        }
        values_.resize(offset_[n]);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = offset_[i]; p < offset_[i + 1]; ++p) values_[p] = kernel(x[i], x[first_[i] + p - offset_[i]]);
        }

        // Target column masses: what the exact kernel keeps inside the grid.
        std::vector<double> target(n, 1.0);
        const double edge = grid.x_max();
        const double radius = gaussian_radius(dt);
        for (std::size_t j = 0; j < n; ++j) {
            if (x[j] + radius <= edge) continue;
            auto f = [&](double y) { return kernel(y, x[j]) * std::pow(y, grid.alpha()); };
            target[j] = std::max(0.0, 1.0 - adaptive_integrate(f, edge, x[j] + radius, 1e-10).value);
        }
        // Keep a sliver below the target so rounding never lets a column exceed it.
        for (double& t : target) t *= 1.0 - 1e-14;

        // u_j = sum_i w_i P_ij d_i; iterate d_j <- sqrt(d_j t_j / u_j) until d_j u_j = t_j.
        auto weighted_sums = [&](const std::vector<double>& d) {
            std::vector<double> u(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double wd = w[i] * d[i];
                for (std::size_t p = offset_[i]; p < offset_[i + 1]; ++p) u[first_[i] + p - offset_[i]] += wd * values_[p];
            }
            return u;
        };
        std::vector<double> d(n, 1.0);
        {
            const auto c = weighted_sums(d);
            for (std::size_t j = 0; j < n; ++j) d[j] = c[j] > 0.0 ? std::sqrt(target[j] / c[j]) : 0.0;
        }
        for (int it = 0; it < 200; ++it) {
            const auto u = weighted_sums(d);
            double worst = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (u[j] <= 0.0 || target[j] <= 0.0) continue;
                worst = std::max(worst, std::abs(d[j] * u[j] / target[j] - 1.0));
                d[j] = std::sqrt(d[j] * target[j] / u[j]);
            }
            if (worst < 1e-15) break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = offset_[i]; p < offset_[i + 1]; ++p) {
                const std::size_t j = first_[i] + p - offset_[i];
                values_[p] *= d[i] * d[j] * w[j];
            }
        }
        // Whatever rounding leaves above the target comes off the diagonal, which
        // keeps the weighted symmetry.
        std::vector<double> mass(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = offset_[i]; p < offset_[i + 1]; ++p) mass[first_[i] + p - offset_[i]] += w[i] * values_[p];
        }
        for (std::size_t j = 0; j < n; ++j) {
            const double excess = mass[j] - w[j] * target[j] / (1.0 - 1e-14);
            if (excess > 0.0) {
                double& diag = values_[offset_[j] + (j - first_[j])];
                diag = std::max(0.0, diag - excess / w[j]);
            }
        }
    }

    double dt() const noexcept { return dt_; }
    std::size_t entries() const noexcept { return values_.size(); }

    /// out = A in.
    void apply(std::span<const double> in, std::span<double> out) const {
        const std::size_t n = first_.size();
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            const double* a = values_.data() + offset_[i];
            const double* v = in.data() + first_[i];
            const std::size_t len = offset_[i + 1] - offset_[i];
            for (std::size_t p = 0; p < len; ++p) s += a[p] * v[p];
            out[i] = s;
        }
    }

    /// out = A^T in.
    void apply_transpose(std::span<const double> in, std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        const std::size_t n = first_.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double vi = in[i];
            if (vi == 0.0) continue;
            const double* a = values_.data() + offset_[i];
            const std::size_t len = offset_[i + 1] - offset_[i];
            for (std::size_t p = 0; p < len; ++p) out[first_[i] + p] += a[p] * vi;
        }
    }

private:
    double dt_;
    std::vector<std::size_t> first_;
    std::vector<std::size_t> offset_;
    std::vector<double> values_;
};

struct SplittingScheme {
    /// Largest step; each evolution segment of length d uses max(min_steps, ceil(d / max_dt)) equal steps.
    double max_dt = 1.0 / 64.0;
    int min_steps = 4;
    double band_cutoff = 40.0;
};

/// Time grid with per_octave points in every octave [T, 2T), spaced evenly
/// inside the octave: T (1 + k / per_octave). Evenly spaced points within an
/// octave share one step size, so an evolution through the whole grid needs
/// one kinetic matrix per octave. The last point is t_max.
inline std::vector<double> octave_time_grid(double t_min, double t_max, int per_octave) {
    if (!(t_min > 0.0) || !(t_max >= t_min) || per_octave < 1) {
        throw std::invalid_argument("octave_time_grid: need 0 < t_min <= t_max and per_octave >= 1");
    }
    std::vector<double> times;
    for (double T = t_min; T < t_max * (1.0 - 1e-12); T *= 2.0) {
        for (int k = 0; k < per_octave; ++k) {
            const double t = T * (1.0 + static_cast<double>(k) / per_octave);
            if (t < t_max * (1.0 - 1e-12)) times.push_back(t);
        }
    }
    times.push_back(t_max);
    return times;
}

class Semigroup {
public:
    Semigroup(GridPtr grid, Potential V, SplittingScheme scheme = {})
        : grid_(std::move(grid)), potential_(std::move(V)), scheme_(scheme) {
        if (!grid_) throw std::invalid_argument("Semigroup: null grid");
        if (grid_->alpha() != potential_.alpha()) throw std::invalid_argument("Semigroup: alpha mismatch");
        if (!(scheme_.max_dt > 0.0) || scheme_.min_steps < 1) throw std::invalid_argument("Semigroup: bad scheme");
        cell_potential_.resize(grid_->size());
        for (std::size_t i = 0; i < grid_->size(); ++i) {
            cell_potential_[i] = potential_.integral(grid_->cell_lo(i), grid_->cell_hi(i)) / grid_->weight(i);
            if (!std::isfinite(cell_potential_[i])) throw NonLocallyIntegrable("Semigroup: infinite cell average of V");
        }
    }

    const Grid& grid() const noexcept { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    const Potential& potential() const noexcept { return potential_; }
    const SplittingScheme& scheme() const noexcept { return scheme_; }
    /// Cell averages of V used by the potential factor.
    std::span<const double> cell_potential() const noexcept { return cell_potential_; }

    int steps_for(double d) const {
        return std::max(scheme_.min_steps, static_cast<int>(std::ceil(d / scheme_.max_dt - 1e-9)));
    }

    /// K_t f. With `free` set the potential factor is skipped, which gives the
    /// kinetic-only evolution through exactly the same arithmetic.
    GridFunction apply(double t, const GridFunction& f, bool free = false) const {
        return evolve(f, std::vector<double>{t}, free).back();
    }

    /// K_t f at each of the increasing times.
    std::vector<GridFunction> evolve(const GridFunction& f, std::span<const double> times, bool free = false) const {
        check_grid(f);
        std::vector<GridFunction> out;
        out.reserve(times.size());
        std::vector<double> v(f.values().begin(), f.values().end());
        std::vector<double> scratch(v.size());
        double now = 0.0;
        for (double t : times) {
            if (!(t >= now)) throw std::invalid_argument("Semigroup::evolve: times must be increasing and >= 0");
            if (t > now) {
                const int n = steps_for(t - now);
                const double dt = (t - now) / n;
                step(v, scratch, dt, n, free);
                now = t;
            }
            out.emplace_back(grid_, v);
        }
        return out;
    }

    /// Runs n Strang steps of size dt in place.
    void step(std::vector<double>& v, std::vector<double>& scratch, double dt, int n, bool free = false) const {
        const KineticPropagator& A = propagator(dt);
        const std::vector<double>* half = free ? nullptr : &half_factor(dt);
        for (int s = 0; s < n; ++s) {
            if (half) {
                for (std::size_t i = 0; i < v.size(); ++i) v[i] *= (*half)[i];
            }
            A.apply(v, scratch);
            v.swap(scratch);
            if (half) {
                for (std::size_t i = 0; i < v.size(); ++i) v[i] *= (*half)[i];
            }
        }
    }

    /// Discrete unit point mass at node j: 1 / w_j on cell j.
    GridFunction point_mass(std::size_t j) const {
        GridFunction e(grid_);
        e[j] = 1.0 / grid_->weight(j);
        return e;
    }

    /// Approximate column K_t(., y_j).
    GridFunction kernel_column(double t, std::size_t j, bool free = false) const {
        return apply(t, point_mass(j), free);
    }

    const KineticPropagator& propagator(double dt) const {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(dt);
        if (it != cache_.end()) return *it->second;
        if (cached_entries_ > kMaxCachedEntries) {
            cache_.clear();
            half_factors_.clear();
            cached_entries_ = 0;
        }
        auto p = std::make_unique<KineticPropagator>(*grid_, dt, scheme_.band_cutoff);
        cached_entries_ += p->entries();
        return *cache_.emplace(dt, std::move(p)).first->second;
    }

private:
    static constexpr std::size_t kMaxCachedEntries = 24'000'000;

    const std::vector<double>& half_factor(double dt) const {
        std::lock_guard lock(mutex_);
        auto it = half_factors_.find(dt);
        if (it != half_factors_.end()) return it->second;
        std::vector<double> d(cell_potential_.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::exp(-0.5 * dt * cell_potential_[i]);
        return half_factors_.emplace(dt, std::move(d)).first->second;
    }

    void check_grid(const GridFunction& f) const {
        if (f.grid_ptr() != grid_) throw MixedGrids("Semigroup: function lives on a different grid");
    }

    GridPtr grid_;
    Potential potential_;
    SplittingScheme scheme_;
    std::vector<double> cell_potential_;
    mutable std::mutex mutex_;
    mutable std::map<double, std::unique_ptr<KineticPropagator>> cache_;
    mutable std::map<double, std::vector<double>> half_factors_;
    mutable std::size_t cached_entries_ = 0;
};

inline GridFunction schrodinger_apply(const Potential& V, double t, const GridFunction& f,
                                      const SplittingScheme& scheme = {}) {
    return Semigroup(f.grid_ptr(), V, scheme).apply(t, f);
}

inline GridFunction schrodinger_kernel_column(const Potential& V, double t, const GridPtr& grid, std::size_t j,
                                              const SplittingScheme& scheme = {}) {
    return Semigroup(grid, V, scheme).kernel_column(t, j);
}

struct FeynmanKacResult {
    double estimate;
    double stderr_;
    std::uint64_t seed;
    std::int64_t n_paths;
    int n_steps;
};

/// Monte Carlo estimate of E^x[exp(-\int_0^t V(B_s) ds) f(B_t)] for the Bessel
/// process generated by f'' + (alpha/x) f'. Its square at step size h moves by the
/// exact transition Y' = 2h * chi'^2_{alpha+1}(Y / 2h). The V integral uses the
/// trapezoid rule along each path. Paths are split into a fixed number of
/// batches, each with its own stream seeded from (seed, batch), and summed in
/// batch order, so results depend only on the arguments.
inline FeynmanKacResult feynman_kac(const Potential& V, double t, double x0, const std::function<double(double)>& f,
                                    std::int64_t n_paths, int n_steps, std::uint64_t seed) {
    if (n_paths < 1 || n_steps < 1) throw std::invalid_argument("feynman_kac: need n_paths, n_steps >= 1");
    if (!(x0 > 0.0) || !(t > 0.0)) throw std::invalid_argument("feynman_kac: need x0 > 0 and t > 0");
    constexpr int kBatches = 64;
    const double h = t / n_steps;
    const double dof = V.alpha() + 1.0;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int batch = 0; batch < kBatches; ++batch) {
        const std::int64_t begin = n_paths * batch / kBatches;
        const std::int64_t end = n_paths * (batch + 1) / kBatches;
        std::seed_seq sequence{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                               static_cast<std::uint32_t>(batch)};
        std::mt19937_64 rng(sequence);
        double batch_sum = 0.0;
        double batch_sq = 0.0;
        for (std::int64_t p = begin; p < end; ++p) {
            double y = x0 * x0;
            double v_prev = V(x0);
            double exponent = 0.0;
            for (int s = 0; s < n_steps; ++s) {
                boost::random::non_central_chi_squared_distribution<double> law(dof, y / (2.0 * h));
                y = 2.0 * h * law(rng);
                const double v_next = V(std::sqrt(y));
                exponent += 0.5 * h * (v_prev + v_next);
                v_prev = v_next;
            }
            if (!std::isfinite(exponent)) {
                throw FeynmanKacError("feynman_kac: potential integral along a path is not finite (path reached " +
                                      std::to_string(std::sqrt(y)) + ")");
            }
            const double value = std::exp(-exponent) * f(std::sqrt(y));
            batch_sum += value;
            batch_sq += value * value;
        }
        sum += batch_sum;
        sum_sq += batch_sq;
    }
    const double n = static_cast<double>(n_paths);
    const double mean = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
    return {mean, std::sqrt(var / n), seed, n_paths, n_steps};
}

struct PerturbationReport {
    double lhs;        ///< P_t(x, y) - K_t(x, y)
    double rhs;        ///< \int_0^t \int P_{t-s}(x, z) V(z) K_s(z, y) dmu(z) ds
    double residual;   ///< |lhs - rhs|
    double tolerance;  ///< discretization error estimate for the two routes
};

namespace detail {

// Time integral of s -> \int P_{t-s}(x, z) V(z) K_s(z, y) dmu(z) with n equal steps.
inline double duhamel_integral(const Semigroup& sg, double t, std::size_t ix, std::size_t jy, int n) {
    const Grid& g = sg.grid();
    const double dt = t / n;
    const auto& A = sg.propagator(dt);
    const auto vbar = sg.cell_potential();
    // Columns K_{k dt}(., y) for k = 0..n.
    std::vector<std::vector<double>> columns;
    columns.reserve(static_cast<std::size_t>(n) + 1);
    std::vector<double> v(g.size(), 0.0), scratch(g.size());
    v[jy] = 1.0 / g.weight(jy);
    columns.push_back(v);
    for (int k = 0; k < n; ++k) {
        sg.step(v, scratch, dt, 1);
        columns.push_back(v);
    }
    // Rows rho_m = e_x^T A^m, so that P_{m dt}(x, z) = rho_m(z) / w_z.
    std::vector<double> row(g.size(), 0.0);
    row[ix] = 1.0;
    std::vector<double> integrand(static_cast<std::size_t>(n) + 1);
    for (int m = 0; m <= n; ++m) {
        const auto& col = columns[static_cast<std::size_t>(n - m)];
        double s = 0.0;
        for (std::size_t z = 0; z < g.size(); ++z) s += row[z] * vbar[z] * col[z];
        integrand[static_cast<std::size_t>(n - m)] = s;
        A.apply_transpose(row, scratch);
        row.swap(scratch);
    }
    double total = 0.0;
    for (int k = 0; k < n; ++k) total += 0.5 * dt * (integrand[k] + integrand[k + 1]);
    return total;
}

}  // namespace detail

/// Both sides of P_t - K_t = \int_0^t P_{t-s} V K_s ds at grid nodes (x_i, y_j).
/// The left side uses the exact kernel and the grid column; the right side uses
/// the grid evolution and the trapezoid rule in s. The tolerance adds the grid
/// error of the free column at (x, y) and the step-halving change of the right side.
inline PerturbationReport perturbation_residual(const Semigroup& sg, double t, std::size_t ix, std::size_t jy,
                                                int s_steps) {
    if (s_steps < 2) throw std::invalid_argument("perturbation_residual: need at least 2 time steps");
    const Grid& g = sg.grid();
    const HeatKernel kernel(g.alpha(), t);
    const double p_exact = kernel(g.node(ix), g.node(jy));
    std::vector<double> v(g.size(), 0.0), scratch(g.size());
    const double dt = t / s_steps;
    v[jy] = 1.0 / g.weight(jy);
    auto free = v;
    sg.step(v, scratch, dt, s_steps);
    sg.step(free, scratch, dt, s_steps, true);
    const double lhs = p_exact - v[ix];
    const double rhs = detail::duhamel_integral(sg, t, ix, jy, s_steps);
    const double coarse = detail::duhamel_integral(sg, t, ix, jy, s_steps / 2);
    const double tol = std::abs(free[ix] - p_exact) + std::abs(rhs - coarse);
    return {lhs, rhs, std::abs(lhs - rhs), tol};
}

}  // namespace besselh
