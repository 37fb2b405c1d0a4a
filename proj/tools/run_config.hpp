#pragma once

// Command-line configuration shared by every subcommand.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "besselh/grid.hpp"
#include "besselh/measure.hpp"

namespace besselh::cli {

/// Raised for a bad flag value; the message starts with the flag name.
class UsageError : public std::runtime_error {
public:
    UsageError(const std::string& flag, const std::string& what) : std::runtime_error(flag + ": " + what), flag_(flag) {}
    const std::string& flag() const noexcept { return flag_; }

private:
    std::string flag_;
};

struct TimeGridSpec {
    double t_min = 0.01;
    double t_max = 1.0;
    int per_octave = 4;
};

/// Tolerances and sizes a run may override with --tol NAME=VALUE.
inline std::map<std::string, double> default_tolerances() {
    return {
        {"kernel_mass", 1e-8},           // |int P_t(., y) dmu - 1|
        {"gaussian_samples", 2000},      // random (x, y, t) for the Gaussian bounds
        {"domination_trials", 20},       // random f >= 0 in the semigroup stage
        {"mc_paths", 20000},
        {"mc_steps", 64},
        {"mc_points", 3},
        {"mc_sigma", 3},                 // allowed standard errors
        {"mc_grid", 1e-3},               // floor for the grid error in the MC comparison
        {"perturbation_points", 3},
        {"perturbation_factor", 5},      // residual <= factor * combined tolerance
        {"hardy_intervals", 12},
        {"hardy_spread", 10},            // max local-atom norm < spread * median
        {"resupport_trials", 20},
        {"resupport_certificate", 10},   // sum |lambda_j|
        {"section_samples", 3},          // intervals per condition check
        {"superharmonic_slack", 1e-6},
    };
}

struct RunConfig {
    double alpha = 0.5;
    std::string potential_text = "power 1 0";
    std::string potential_file;  ///< takes precedence over potential_text when set
    Interval window{0.0, 8.0};
    GridSpec grid{};
    TimeGridSpec tgrid{};
    std::uint64_t seed = 1;
    std::map<std::string, double> tol = default_tolerances();
    std::string out_dir = "besselh_out";

    double tolerance(const std::string& name) const { return tol.at(name); }
    int count(const std::string& name) const { return static_cast<int>(tol.at(name)); }

    Potential potential() const {
        const WeightedMeasure m(alpha);
        if (!potential_file.empty()) {
            std::ifstream in(potential_file);
            if (!in) throw UsageError("--potential-file", "cannot open '" + potential_file + "'");
            return parse_potential(in, m);
        }
        std::string text = potential_text;
        for (char& c : text)
            if (c == ';') c = '\n';
        return parse_potential(text, m);
    }

    /// Flags that reproduce this configuration.
    std::vector<std::string> echo() const {
        auto num = [](double v) {
            std::ostringstream os;
            os.precision(17);
            os << v;
            return os.str();
        };
        std::vector<std::string> args{"--alpha", num(alpha)};
        if (potential_file.empty()) {
            args.insert(args.end(), {"--potential", potential_text});
        } else {
            args.insert(args.end(), {"--potential-file", potential_file});
        }
        args.insert(args.end(), {"--window", num(window.a()) + ":" + num(window.b()), "--grid",
                                 std::to_string(grid.cells) + ":" + num(grid.x_max) + ":" + num(grid.ratio),
                                 "--tgrid",
                                 num(tgrid.t_min) + ":" + num(tgrid.t_max) + ":" + std::to_string(tgrid.per_octave),
                                 "--seed", std::to_string(seed), "--out", out_dir});
        const auto defaults = default_tolerances();
        for (const auto& [k, v] : tol) {
            if (defaults.at(k) != v) args.insert(args.end(), {"--tol", k + "=" + num(v)});
        }
        return args;
    }
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) parts.push_back(cur);
    if (!s.empty() && s.back() == sep) parts.emplace_back();
    return parts;
}

inline double number(const std::string& flag, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw UsageError(flag, "'" + text + "' is not a number");
    }
    if (used != text.size() || !std::isfinite(v)) throw UsageError(flag, "'" + text + "' is not a number");
    return v;
}

inline int integer(const std::string& flag, const std::string& text) {
    const double v = number(flag, text);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw UsageError(flag, "'" + text + "' is not an integer");
    return static_cast<int>(v);
}

inline std::vector<std::string> fields(const std::string& flag, const std::string& text, std::size_t n,
                                       const std::string& shape) {
    auto parts = split(text, ':');
    if (parts.size() != n) throw UsageError(flag, "expected " + shape + ", got '" + text + "'");
    return parts;
}

}  // namespace detail

/// Flag values as strings; validated by finalize().
struct RawFlags {
    std::string alpha, potential, potential_file, window, grid, tgrid, seed, out;
    std::vector<std::string> tol;
};

inline void add_global_flags(CLI::App& app, RawFlags& raw) {
    app.add_option("--alpha", raw.alpha, "Weight exponent of dmu = x^alpha dx (> 0)");
    app.add_option("--potential", raw.potential, "Inline potential, directives separated by ';'");
    app.add_option("--potential-file", raw.potential_file, "Potential file ('piece a b v' / 'power c gamma')");
    app.add_option("--window", raw.window, "Section window lo:hi");
    app.add_option("--grid", raw.grid, "Spatial grid n:xmax:ratio");
    app.add_option("--tgrid", raw.tgrid, "Time grid tmin:tmax:per-octave");
    app.add_option("--seed", raw.seed, "Seed for every random draw");
    app.add_option("--out", raw.out, "Output directory");
    app.add_option("--tol", raw.tol, "Override NAME=VALUE (repeatable)");
}

/// Validates raw flags and fills defaults. Throws UsageError naming the flag.
inline RunConfig finalize(const RawFlags& raw) {
    using namespace detail;
    RunConfig c;
    if (!raw.alpha.empty()) {
        c.alpha = number("--alpha", raw.alpha);
        if (!(c.alpha > 0.0)) throw UsageError("--alpha", "must be positive, got " + raw.alpha);
    }
    if (!raw.potential.empty() && !raw.potential_file.empty()) {
        throw UsageError("--potential-file", "cannot be combined with --potential");
    }
    if (!raw.potential.empty()) c.potential_text = raw.potential;
    c.potential_file = raw.potential_file;
    if (!raw.window.empty()) {
        const auto f = fields("--window", raw.window, 2, "lo:hi");
        const double lo = number("--window", f[0]), hi = number("--window", f[1]);
        if (!(lo >= 0.0 && hi > lo)) throw UsageError("--window", "need 0 <= lo < hi, got " + raw.window);
        c.window = Interval(lo, hi);
    }
    if (!raw.grid.empty()) {
        const auto f = fields("--grid", raw.grid, 3, "n:xmax:ratio");
        c.grid = {integer("--grid", f[0]), number("--grid", f[1]), number("--grid", f[2])};
        if (c.grid.cells < 16) throw UsageError("--grid", "need at least 16 cells");
        if (!(c.grid.x_max > 0.0)) throw UsageError("--grid", "xmax must be positive");
        if (!(c.grid.ratio > 1.0)) throw UsageError("--grid", "ratio must exceed 1");
    }
    if (!raw.tgrid.empty()) {
        const auto f = fields("--tgrid", raw.tgrid, 3, "tmin:tmax:per-octave");
        c.tgrid = {number("--tgrid", f[0]), number("--tgrid", f[1]), integer("--tgrid", f[2])};
        if (!(c.tgrid.t_min > 0.0 && c.tgrid.t_max >= c.tgrid.t_min)) {
            throw UsageError("--tgrid", "need 0 < tmin <= tmax");
        }
        if (c.tgrid.per_octave < 1) throw UsageError("--tgrid", "per-octave must be >= 1");
    }
    if (!raw.seed.empty()) {
        const double s = number("--seed", raw.seed);
        if (!(s >= 0.0) || s != std::floor(s) || s > 9.007199254740992e15) {
            throw UsageError("--seed", "must be a nonnegative integer, got " + raw.seed);
        }
        c.seed = static_cast<std::uint64_t>(s);
    }
    if (!raw.out.empty()) c.out_dir = raw.out;
    for (const auto& item : raw.tol) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw UsageError("--tol", "expected NAME=VALUE, got '" + item + "'");
        const std::string name = item.substr(0, eq);
        if (!c.tol.contains(name)) throw UsageError("--tol", "unknown tolerance '" + name + "'");
        const double v = number("--tol", item.substr(eq + 1));
        if (!(v > 0.0)) throw UsageError("--tol", name + " must be positive");
        c.tol[name] = v;
    }
    return c;
}

}  // namespace besselh::cli
