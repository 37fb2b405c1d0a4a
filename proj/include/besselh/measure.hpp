#pragma once

// Weighted measure d(mu) = x^alpha dx on X = (0, inf): interval masses, balls,
// enlargements and potentials. Every mass is evaluated in closed form.

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "besselh/error.hpp"

namespace besselh {

/// \int_a^b x^{p-1} dx = (b^p - a^p) / p for p > 0, without cancellation when b ~ a.
inline double power_integral(double a, double b, double p) {
    if (b <= a) return 0.0;
    if (a <= 0.0) return std::pow(b, p) / p;
    if (b > 2.0 * a) return (std::pow(b, p) - std::pow(a, p)) / p;
    const double log_ratio = std::log1p((b - a) / a);
    return std::pow(a, p) * std::expm1(p * log_ratio) / p;
}

class WeightedMeasure {
public:
    explicit WeightedMeasure(double alpha) : alpha_(alpha) {
        if (!(alpha > 0.0) || !std::isfinite(alpha)) {
            throw std::invalid_argument("WeightedMeasure: alpha must be a finite positive number");
        }
    }

    double alpha() const noexcept { return alpha_; }

    /// Density x^alpha.
    double density(double x) const { return std::pow(x, alpha_); }

    /// mu((a, b)) = (b^{1+alpha} - a^{1+alpha}) / (1 + alpha); zero when a >= b.
    double mass(double a, double b) const { return power_integral(a, b, 1.0 + alpha_); }

private:
    double alpha_;
};

/// Closed subinterval [a, b] of [0, inf) with a < b. When a == 0 the point 0 is
/// not part of X, so (0, b] and [0, b] describe the same set.
class Interval {
public:
    Interval(double a, double b) : a_(a), b_(b) {
        if (!(a >= 0.0) || !(b > a) || !std::isfinite(b)) {
            throw std::invalid_argument("Interval: need 0 <= a < b < inf, got [" + std::to_string(a) +
                                        ", " + std::to_string(b) + "]");
        }
    }

    double a() const noexcept { return a_; }
    double b() const noexcept { return b_; }
    double length() const noexcept { return b_ - a_; }
    double center() const noexcept { return 0.5 * (a_ + b_); }

    bool contains(double x) const noexcept { return x >= a_ && x <= b_; }
    bool contains(const Interval& other) const noexcept { return other.a_ >= a_ && other.b_ <= b_; }

    /// Intersection with positive length.
    bool overlaps(const Interval& other) const noexcept {
        return std::min(b_, other.b_) > std::max(a_, other.a_);
    }

    /// Closed intersection is nonempty (sharing an endpoint counts).
    bool touches(const Interval& other) const noexcept {
        return std::min(b_, other.b_) >= std::max(a_, other.a_);
    }

    std::optional<Interval> intersect(const Interval& other) const {
        const double lo = std::max(a_, other.a_);
        const double hi = std::min(b_, other.b_);
        if (hi > lo) return Interval(lo, hi);
        return std::nullopt;
    }

    friend bool operator==(const Interval&, const Interval&) = default;

private:
    double a_;
    double b_;
};

inline double mu_interval(const WeightedMeasure& m, double a, double b) { return m.mass(a, b); }
inline double mu_interval(const WeightedMeasure& m, const Interval& I) { return m.mass(I.a(), I.b()); }

/// Which length |cI| is used when a dilated ball is cut off at 0.
enum class LengthConvention {
    Nominal,    ///< the ball diameter 2cr
    Truncated,  ///< the diameter of cI intersected with X
};

/// A dilated ball B(x, r) intersected with X. `nominal_length` is the untruncated
/// diameter 2r; `support` is the set actually covered.
struct Ball {
    Interval support;
    double nominal_length;

    double length(LengthConvention convention) const {
        return convention == LengthConvention::Nominal ? nominal_length : support.length();
    }
    bool truncated() const noexcept { return support.length() < nominal_length; }
};

/// B(x, r) intersected with X, i.e. (max(0, x - r), x + r).
inline Ball ball(double x, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("ball: radius must be positive");
    if (!(x >= 0.0)) throw std::invalid_argument("ball: center must be nonnegative");
    return Ball{Interval(std::max(0.0, x - r), x + r), 2.0 * r};
}

/// cI := B(c_I, c |I| / 2). An interval (0, 2A] is read as the ball B(A, A), which is
/// the same formula.
inline Ball enlarge(const Interval& I, double c) {
    if (!(c >= 1.0)) throw std::invalid_argument("enlarge: factor must be >= 1");
    return ball(I.center(), 0.5 * c * I.length());
}

struct RatioReport {
    double ratio;      ///< |I|^2 / mu(I)
    double comparand;  ///< b^{1-alpha} - a^{1-alpha}
};

inline RatioReport ratio_sq_over_mu(const WeightedMeasure& m, const Interval& I) {
    const double len = I.length();
    return {len * len / m.mass(I.a(), I.b()),
            power_integral(I.a(), I.b(), 1.0 - m.alpha()) * (1.0 - m.alpha())};
}

/// Gamma(x, y) = (y - x)^2 / (y^{alpha+1} - x^{alpha+1}).
inline double gamma_functional(const WeightedMeasure& m, double x, double y) {
    if (!(x >= 0.0) || !(y > x)) throw std::invalid_argument("gamma_functional: need 0 <= x < y");
    const double d = y - x;
    return d * d / ((1.0 + m.alpha()) * m.mass(x, y));
}

/// mu(B(x, 2r)) / mu(B(x, r)), both cut off at 0.
inline double doubling_ratio(const WeightedMeasure& m, double x, double r) {
    const Interval big = ball(x, 2.0 * r).support;
    const Interval small = ball(x, r).support;
    return m.mass(big.a(), big.b()) / m.mass(small.a(), small.b());
}

struct PotentialPiece {
    Interval interval;
    double value;
};

/// c * x^{-gamma} on all of X. gamma = 0 gives a constant potential.
struct PowerTerm {
    double coeff;
    double gamma;
};

/// V >= 0 as a sum of constants on intervals plus power laws, locally
/// mu-integrable (every power exponent satisfies gamma < 1 + alpha). An optional
/// window restricts the whole potential to V * 1_window.
class Potential {
public:
    Potential(const WeightedMeasure& m, std::vector<PotentialPiece> pieces, std::vector<PowerTerm> powers = {})
        : alpha_(m.alpha()), pieces_(std::move(pieces)), powers_(std::move(powers)) {
        for (const auto& p : pieces_) {
            if (!(p.value >= 0.0) || !std::isfinite(p.value)) {
                throw std::invalid_argument("Potential: piece values must be finite and >= 0");
            }
        }
        for (const auto& p : powers_) {
            if (!(p.coeff >= 0.0) || !std::isfinite(p.coeff) || !std::isfinite(p.gamma)) {
                throw std::invalid_argument("Potential: power coefficients must be finite and >= 0");
            }
            if (p.coeff > 0.0 && !(p.gamma < 1.0 + alpha_)) {
                throw NonLocallyIntegrable("Potential: x^-" + std::to_string(p.gamma) +
                                           " is not locally integrable for alpha = " + std::to_string(alpha_) +
                                           " (need gamma < 1 + alpha)");
            }
        }
    }

    static Potential zero(const WeightedMeasure& m) { return Potential(m, {}, {}); }
    static Potential constant(const WeightedMeasure& m, double c) { return Potential(m, {}, {{c, 0.0}}); }
    static Potential power(const WeightedMeasure& m, double c, double gamma) {
        return Potential(m, {}, {{c, gamma}});
    }

    double alpha() const noexcept { return alpha_; }
    const std::vector<PotentialPiece>& pieces() const noexcept { return pieces_; }
    const std::vector<PowerTerm>& powers() const noexcept { return powers_; }
    const std::optional<Interval>& window() const noexcept { return window_; }

    double operator()(double x) const {
        if (window_ && !window_->contains(x)) return 0.0;
        double v = 0.0;
        for (const auto& p : pieces_) {
            if (p.interval.contains(x)) v += p.value;
        }
        for (const auto& p : powers_) {
            if (p.coeff == 0.0) continue;
            v += p.gamma == 0.0 ? p.coeff : p.coeff * std::pow(x, -p.gamma);
        }
        return v;
    }

    /// \int_a^b V d(mu), exact.
    double integral(double a, double b) const { return moment(a, b, alpha_); }

    /// \int_a^b V(y) y^e dy, exact.
    double moment(double a, double b, double e) const {
        if (window_) {
            a = std::max(a, window_->a());
            b = std::min(b, window_->b());
        }
        if (b <= a) return 0.0;
        double total = 0.0;
        for (const auto& p : pieces_) {
            const double lo = std::max(a, p.interval.a());
            const double hi = std::min(b, p.interval.b());
            if (hi > lo && p.value > 0.0) total += p.value * power_integral(lo, hi, 1.0 + e);
        }
        for (const auto& p : powers_) {
            if (p.coeff > 0.0) total += p.coeff * power_integral(a, b, 1.0 + e - p.gamma);
        }
        return total;
    }

    /// sup of V over [a, b]; infinite for a power law reaching 0.
    double sup_on(double a, double b) const {
        if (window_) {
            a = std::max(a, window_->a());
            b = std::min(b, window_->b());
        }
        if (b < a) return 0.0;
        double s = 0.0;
        for (const auto& p : pieces_) {
            if (std::min(b, p.interval.b()) >= std::max(a, p.interval.a())) s += p.value;
        }
        for (const auto& p : powers_) {
            if (p.coeff == 0.0) continue;
            if (p.gamma > 0.0) s += a > 0.0 ? p.coeff * std::pow(a, -p.gamma) : HUGE_VAL;
            else s += p.coeff * std::pow(b, -p.gamma);
        }
        return s;
    }

    bool is_zero() const {
        if (window_ && window_->length() <= 0.0) return true;
        for (const auto& p : pieces_)
            if (p.value > 0.0) return false;
        for (const auto& p : powers_)
            if (p.coeff > 0.0) return false;
        return true;
    }

    /// Value c when V == c on all of X.
    std::optional<double> constant_value() const {
        if (window_) return is_zero() ? std::optional<double>(0.0) : std::nullopt;
        for (const auto& p : pieces_)
            if (p.value > 0.0) return std::nullopt;
        double c = 0.0;
        for (const auto& p : powers_) {
            if (p.coeff == 0.0) continue;
            if (p.gamma != 0.0) return std::nullopt;
            c += p.coeff;
        }
        return c;
    }

    /// Points where V may jump.
    std::vector<double> breakpoints() const {
        std::vector<double> pts;
        for (const auto& p : pieces_) {
            pts.push_back(p.interval.a());
            pts.push_back(p.interval.b());
        }
        if (window_) {
            pts.push_back(window_->a());
            pts.push_back(window_->b());
        }
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        return pts;
    }

    /// V * 1_J.
    Potential restricted(const Interval& J) const {
        Potential r = *this;
        r.window_ = window_ ? window_->intersect(J) : std::optional<Interval>(J);
        if (!r.window_) {
            r.pieces_.clear();
            r.powers_.clear();
        }
        return r;
    }

private:
    double alpha_;
    std::vector<PotentialPiece> pieces_;
    std::vector<PowerTerm> powers_;
    std::optional<Interval> window_;
};

inline double potential_integral(const WeightedMeasure& m, const Potential& V, const Interval& I) {
    if (m.alpha() != V.alpha()) {
        throw std::invalid_argument("potential_integral: measure and potential use different alpha");
    }
    return V.integral(I.a(), I.b());
}

/// Parses the potential file format: one directive per line,
///   piece <a> <b> <value>
///   power <coeff> <gamma>
/// Blank lines and '#' comments are ignored.
inline Potential parse_potential(std::istream& in, const WeightedMeasure& m) {
    std::vector<PotentialPiece> pieces;
    std::vector<PowerTerm> powers;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string directive;
        if (!(ss >> directive)) continue;
        if (directive == "piece") {
            double a = 0, b = 0, v = 0;
            if (!(ss >> a >> b >> v)) throw ParseError("expected 'piece <a> <b> <value>'", lineno);
            if (!(a >= 0.0 && b > a)) throw ParseError("piece needs 0 <= a < b", lineno);
            if (!(v >= 0.0)) throw ParseError("piece value must be >= 0", lineno);
            pieces.push_back({Interval(a, b), v});
        } else if (directive == "power") {
            double c = 0, g = 0;
            if (!(ss >> c >> g)) throw ParseError("expected 'power <coeff> <gamma>'", lineno);
            if (!(c >= 0.0)) throw ParseError("power coefficient must be >= 0", lineno);
            if (c > 0.0 && !(g < 1.0 + m.alpha())) {
                throw NonLocallyIntegrable("line " + std::to_string(lineno) + ": power exponent " +
                                           std::to_string(g) + " >= 1 + alpha = " + std::to_string(1.0 + m.alpha()));
            }
            powers.push_back({c, g});
        } else {
            throw ParseError("unknown directive '" + directive + "'", lineno);
        }
        std::string extra;
        if (ss >> extra) throw ParseError("trailing token '" + extra + "'", lineno);
    }
    return Potential(m, std::move(pieces), std::move(powers));
}

inline Potential parse_potential(const std::string& text, const WeightedMeasure& m) {
    std::istringstream in(text);
    return parse_potential(in, m);
}

/// Writes a potential in the format read by parse_potential.
inline std::string format_potential(const Potential& V) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& p : V.pieces()) {
        out << "piece " << p.interval.a() << ' ' << p.interval.b() << ' ' << p.value << '\n';
    }
    for (const auto& p : V.powers()) out << "power " << p.coeff << ' ' << p.gamma << '\n';
    return out.str();
}

}  // namespace besselh
