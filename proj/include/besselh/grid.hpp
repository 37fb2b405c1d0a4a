#pragma once

// Nonuniform spatial grids on (0, x_max] and functions sampled on them.
// A grid is a list of cell edges 0 = e_0 < e_1 < ... < e_n = x_max; each cell
// carries its exact mu-mass as quadrature weight. The node sits halfway between
// the cell midpoint and the mu-centroid: the one-point rule then has no h^2 error
// term for smooth integrands, since the midpoint and centroid errors are
// +h^2/24 and -h^2/24 times \int f'' dmu.

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "besselh/error.hpp"
#include "besselh/measure.hpp"

namespace besselh {

class Grid {
public:
    Grid(double alpha, std::vector<double> edges) : alpha_(alpha), edges_(std::move(edges)) {
        if (edges_.size() < 2) throw std::invalid_argument("Grid: need at least one cell");
        if (edges_.front() < 0.0) throw std::invalid_argument("Grid: edges must be >= 0");
        for (std::size_t i = 1; i < edges_.size(); ++i) {
            if (!(edges_[i] > edges_[i - 1])) throw std::invalid_argument("Grid: edges must increase strictly");
        }
        const WeightedMeasure m(alpha);
        const std::size_t n = edges_.size() - 1;
        nodes_.resize(n);
        weights_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = edges_[i];
            const double b = edges_[i + 1];
            weights_[i] = m.mass(a, b);
            const double centroid = power_integral(a, b, 2.0 + alpha) / power_integral(a, b, 1.0 + alpha);
            nodes_[i] = 0.5 * (0.5 * (a + b) + centroid);
        }
    }

    double alpha() const noexcept { return alpha_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::span<const double> nodes() const noexcept { return nodes_; }
    std::span<const double> weights() const noexcept { return weights_; }
    std::span<const double> edges() const noexcept { return edges_; }
    double node(std::size_t i) const { return nodes_[i]; }
    double weight(std::size_t i) const { return weights_[i]; }
    double x_min() const noexcept { return edges_.front(); }
    double x_max() const noexcept { return edges_.back(); }
    double cell_lo(std::size_t i) const { return edges_[i]; }
    double cell_hi(std::size_t i) const { return edges_[i + 1]; }

    /// Index of the cell containing x (cells are half-open (e_i, e_{i+1}]).
    std::size_t cell_of(double x) const {
        if (x <= edges_.front()) return 0;
        if (x >= edges_.back()) return size() - 1;
        const auto it = std::lower_bound(edges_.begin(), edges_.end(), x);
        return static_cast<std::size_t>(it - edges_.begin()) - 1;
    }

    /// Index of the node closest to x.
    std::size_t nearest_node(double x) const {
        const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), x);
        if (it == nodes_.begin()) return 0;
        if (it == nodes_.end()) return size() - 1;
        const auto i = static_cast<std::size_t>(it - nodes_.begin());
        return (x - nodes_[i - 1] <= nodes_[i] - x) ? i - 1 : i;
    }

    /// Half-open index range [first, last) of the cells lying inside [a, b].
    std::pair<std::size_t, std::size_t> cells_within(double a, double b) const {
        std::size_t first = size();
        std::size_t last = 0;
        for (std::size_t i = 0; i < size(); ++i) {
            if (edges_[i] >= a - 1e-14 * std::max(1.0, a) && edges_[i + 1] <= b + 1e-14 * std::max(1.0, b)) {
                first = std::min(first, i);
                last = i + 1;
            }
        }
        if (first >= last) return {0, 0};
        return {first, last};
    }

    /// Whether a and b are both cell edges (up to rounding).
    bool aligned(double a, double b) const {
        auto is_edge = [&](double x) {
            const auto it = std::lower_bound(edges_.begin(), edges_.end(), x - 1e-12 * std::max(1.0, x));
            return it != edges_.end() && std::abs(*it - x) <= 1e-12 * std::max(1.0, x);
        };
        return is_edge(a) && is_edge(b);
    }

    /// Discrete measure: sum of weights of nodes inside [a, b].
    double mass(double a, double b) const {
        double total = 0.0;
        for (std::size_t i = 0; i < size(); ++i) {
            if (nodes_[i] >= a && nodes_[i] <= b) total += weights_[i];
        }
        return total;
    }

private:
    double alpha_;
    std::vector<double> edges_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Rounds h down to a power of two so that dyadic points are cell edges.
inline double dyadic_spacing(double h) {
    if (!(h > 0.0)) throw std::invalid_argument("dyadic_spacing: h must be positive");
    return std::exp2(std::floor(std::log2(h) + 1e-9));
}

/// Edges 0, ..., h/r^2, h/r, h: geometric cells refining toward 0 until the
/// first cell is narrower than `smallest`.
inline std::vector<double> geometric_head(double h, double ratio, double smallest) {
    if (!(ratio > 1.0)) throw std::invalid_argument("grid: geometric ratio must be > 1");
    std::vector<double> head{0.0};
    std::vector<double> inner;
    for (double e = h / ratio; e > smallest; e /= ratio) inner.push_back(e);
    if (inner.empty()) inner.push_back(h / ratio);
    head.insert(head.end(), inner.rbegin(), inner.rend());
    head.push_back(h);
    return head;
}

/// Geometric head followed by uniform cells of width h up to x_max (rounded up
/// to a multiple of h).
inline GridPtr make_uniform_grid(double alpha, double h, double x_max, double head_ratio = 2.0,
                                 double head_depth = 1e-3) {
    if (!(x_max > h)) throw std::invalid_argument("grid: x_max must exceed the spacing");
    auto edges = geometric_head(h, head_ratio, h * head_depth);
    const auto cells = static_cast<long>(std::ceil(x_max / h - 1e-9));
    for (long k = 2; k <= cells; ++k) edges.push_back(h * static_cast<double>(k));
    return std::make_shared<const Grid>(alpha, std::move(edges));
}

/// Uniform spacing h on (0, fine_end], then cells growing geometrically by
/// tail_ratio (capped at max_cell) up to x_max.
inline GridPtr make_graded_grid(double alpha, double h, double fine_end, double x_max, double tail_ratio,
                                double max_cell = HUGE_VAL, double head_ratio = 2.0) {
    if (!(fine_end > h) || !(x_max >= fine_end)) throw std::invalid_argument("grid: need h < fine_end <= x_max");
    auto edges = geometric_head(h, head_ratio, h * 1e-3);
    const auto cells = static_cast<long>(std::ceil(fine_end / h - 1e-9));
    for (long k = 2; k <= cells; ++k) edges.push_back(h * static_cast<double>(k));
    double width = h;
    while (edges.back() < x_max) {
        width = std::min(width * tail_ratio, max_cell);
        edges.push_back(edges.back() + width);
    }
    return std::make_shared<const Grid>(alpha, std::move(edges));
}

/// Grid spec as given on the command line: about n uniform cells on (0, x_max]
/// with a geometric head of the given ratio.
struct GridSpec {
    int cells = 512;
    double x_max = 16.0;
    double ratio = 2.0;
};

inline GridPtr make_grid(double alpha, const GridSpec& spec) {
    if (spec.cells < 2 || !(spec.x_max > 0.0) || !(spec.ratio > 1.0)) {
        throw std::invalid_argument("grid: need cells >= 2, x_max > 0, ratio > 1");
    }
    return make_uniform_grid(alpha, dyadic_spacing(spec.x_max / spec.cells), spec.x_max, spec.ratio);
}

class GridFunction {
public:
    GridFunction(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (!grid_) throw std::invalid_argument("GridFunction: null grid");
        if (values_.size() != grid_->size()) throw std::invalid_argument("GridFunction: size mismatch");
    }

    explicit GridFunction(GridPtr grid) : GridFunction(grid, std::vector<double>(grid ? grid->size() : 0, 0.0)) {}

    template <class F>
    static GridFunction sample(GridPtr grid, F&& f) {
        std::vector<double> v(grid->size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid->node(i));
        return GridFunction(std::move(grid), std::move(v));
    }

    const Grid& grid() const noexcept { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    std::vector<double>& mutable_values() noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    double integral() const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += grid_->weight(i) * values_[i];
        return s;
    }
    double l1_norm() const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += grid_->weight(i) * std::abs(values_[i]);
        return s;
    }
    double l2_norm() const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += grid_->weight(i) * values_[i] * values_[i];
        return std::sqrt(s);
    }
    double sup_norm() const {
        double s = 0.0;
        for (double v : values_) s = std::max(s, std::abs(v));
        return s;
    }

    /// Piecewise-linear interpolation between nodes, constant beyond the ends.
    double interpolate(double x) const {
        const auto nodes = grid_->nodes();
        if (x <= nodes.front()) return values_.front();
        if (x >= nodes.back()) return values_.back();
        const auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
        const auto i = static_cast<std::size_t>(it - nodes.begin());
        const double s = (x - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
        return (1.0 - s) * values_[i - 1] + s * values_[i];
    }

    GridFunction& operator+=(const GridFunction& o) {
        require_same_grid(o);
        for (std::size_t i = 0; i < size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    GridFunction& operator-=(const GridFunction& o) {
        require_same_grid(o);
        for (std::size_t i = 0; i < size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    GridFunction& operator*=(double c) {
        for (double& v : values_) v *= c;
        return *this;
    }
    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(double c, GridFunction a) { return a *= c; }

    void require_same_grid(const GridFunction& o) const {
        if (o.grid_ != grid_) throw MixedGrids("grid functions live on different grids");
    }

private:
    GridPtr grid_;
    std::vector<double> values_;
};

}  // namespace besselh
