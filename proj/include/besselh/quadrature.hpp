#pragma once

// Quadrature against x^alpha dx: a Gauss-Jacobi rule for the panel touching 0,
// where the weight is not smooth, and adaptive Gauss-Kronrod on interior panels.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "besselh/error.hpp"

namespace besselh {

struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Jacobi rule for the weight (1 - s)^a (1 + s)^b on [-1, 1],
/// computed with the Golub-Welsch eigenvalue method.
inline GaussRule gauss_jacobi(int n, double a, double b) {
    if (n < 1) throw std::invalid_argument("gauss_jacobi: need n >= 1");
    if (!(a > -1.0) || !(b > -1.0)) throw std::invalid_argument("gauss_jacobi: need a, b > -1");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    const double ab = a + b;
    for (int i = 0; i < n; ++i) {
        const double k = i;
        const double s = 2.0 * k + ab;
        J(i, i) = (s == 0.0 || s + 2.0 == 0.0) ? (b - a) / (ab + 2.0) : (b * b - a * a) / (s * (s + 2.0));
        if (i + 1 < n) {
            const double m = k + 1.0;
            const double sm = 2.0 * m + ab;
            const double num = 4.0 * m * (m + a) * (m + b) * (m + ab);
            const double den = sm * sm * (sm + 1.0) * (sm - 1.0);
            J(i, i + 1) = J(i + 1, i) = std::sqrt(num / den);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(J);
    const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) + std::lgamma(b + 1.0) -
                                std::lgamma(ab + 2.0));
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = solver.eigenvalues()(i);
        const double v = solver.eigenvectors()(0, i);
        rule.weights[i] = mu0 * v * v;
    }
    return rule;
}

/// \int_0^h f(x) x^alpha dx for smooth f, exact for polynomials of degree < 2n.
class EndpointRule {
public:
    EndpointRule(double alpha, int n) : alpha_(alpha), rule_(gauss_jacobi(n, 0.0, alpha)) {}

    template <class F>
    double integrate(F&& f, double h) const {
        double sum = 0.0;
        for (std::size_t i = 0; i < rule_.nodes.size(); ++i) {
            sum += rule_.weights[i] * f(0.5 * h * (1.0 + rule_.nodes[i]));
        }
        return sum * std::pow(0.5 * h, 1.0 + alpha_);
    }

    std::size_t size() const noexcept { return rule_.nodes.size(); }

private:
    double alpha_;
    GaussRule rule_;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
};

/// Adaptive 21-point Gauss-Kronrod on [a, b]; `rel_tol` is relative to the L1 norm.
template <class F>
QuadratureResult adaptive_integrate(F&& f, double a, double b, double rel_tol, unsigned max_depth = 18) {
    QuadratureResult r;
    if (!(b > a)) return r;
    double l1 = 0.0;
    r.value = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, a, b, max_depth, rel_tol, &r.error,
                                                                             &l1);
    r.converged = r.error <= std::max(rel_tol * l1, 1e-300) * 10.0 || r.error < 1e-15;
    return r;
}

/// \int_a^b f(x) x^alpha dx with the endpoint rule on [0, h0] when a == 0.
/// `splits` are interior points where f has a kink or a sharp peak.
class WeightedIntegrator {
public:
    explicit WeightedIntegrator(double alpha) : alpha_(alpha), coarse_(alpha, 20), fine_(alpha, 40) {}

    double alpha() const noexcept { return alpha_; }

    template <class F>
    QuadratureResult integrate(F&& f, double a, double b, std::vector<double> splits, double rel_tol,
                               double endpoint_width) const {
        QuadratureResult total;
        if (!(b > a)) return total;
        auto weighted = [&](double x) { return f(x) * std::pow(x, alpha_); };
        double start = a;
        if (a == 0.0) {
            double h = std::min(endpoint_width, b);
            for (int halvings = 0;; ++halvings) {
                const double c = coarse_.integrate(f, h);
                const double v = fine_.integrate(f, h);
                const double diff = std::abs(v - c);
                if (diff <= rel_tol * std::abs(v) + 1e-300 || halvings > 60) {
                    total.value += v;
                    total.error += diff;
                    if (halvings > 60) total.converged = false;
                    break;
                }
                h *= 0.5;
            }
            start = h;
        }
        splits.push_back(start);
        splits.push_back(b);
        std::sort(splits.begin(), splits.end());
        for (std::size_t i = 0; i + 1 < splits.size(); ++i) {
            const double lo = std::max(splits[i], start);
            const double hi = std::min(splits[i + 1], b);
            if (!(hi > lo)) continue;
            const auto piece = adaptive_integrate(weighted, lo, hi, rel_tol);
            total.value += piece.value;
            total.error += piece.error;
            total.converged = total.converged && piece.converged;
        }
        return total;
    }

private:
    double alpha_;
    EndpointRule coarse_;
    EndpointRule fine_;
};

}  // namespace besselh
