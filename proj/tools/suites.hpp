#pragma once

// One runner per subcommand. Each adds checks and CSV tables to the report.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "besselh/conditions.hpp"
#include "besselh/hardy.hpp"
#include "besselh/kernel.hpp"
#include "besselh/section.hpp"
#include "besselh/semigroup.hpp"
#include "report.hpp"

namespace besselh::cli {

namespace detail {

/// Independent stream per stage so adding draws in one stage leaves the others alone.
inline std::mt19937_64 stream(const RunConfig& c, std::uint32_t stage) {
    std::seed_seq seq{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32), stage};
    return std::mt19937_64(seq);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
}

inline std::string label(const Interval& I) {
    std::ostringstream os;
    os.precision(17);
    os << '[' << I.a() << ' ' << I.b() << ']';
    return os.str();
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Shared state between stages of one run.
struct Context {
    RunConfig config;
    WeightedMeasure measure;
    Potential potential;
    std::optional<ProperSection> section;

    explicit Context(const RunConfig& c) : config(c), measure(c.alpha), potential(c.potential()) {}

    GridPtr grid() const { return make_grid(config.alpha, config.grid); }
    std::vector<double> times() const {
        return octave_time_grid(config.tgrid.t_min, config.tgrid.t_max, config.tgrid.per_octave);
    }
};

inline void run_kernel(Context& ctx, ExperimentReport& rep) {
    const double alpha = ctx.config.alpha;
    rep.run("kernel", "normalization", [&] {
        auto& t = rep.table("kernel_mass.csv", {"alpha", "t", "y", "mass", "residual", "converged"});
        const double tol = ctx.config.tolerance("kernel_mass");
        CheckResult r;
        r.pass = true;
        double worst = 0.0;
        for (double time : ctx.times()) {
            const HeatKernel k(alpha, time);
            for (double y : {0.1, 1.0, 10.0}) {
                const auto m = heat_kernel_mass_residual(k, y, tol);
                t.row(alpha, time, y, m.mass, m.residual, m.converged);
                if (m.residual > worst) {
                    worst = m.residual;
                    r.witness = "t = " + std::to_string(time) + ", y = " + std::to_string(y);
                }
                r.pass = r.pass && m.residual < tol;
            }
        }
        r.constants = {{"max_residual", worst}};
        return r;
    });
    rep.run("kernel", "gaussian_bounds", [&] {
        GaussianSampleSpec spec;
        spec.samples = ctx.config.count("gaussian_samples");
        spec.seed = ctx.config.seed;
        const auto g = gaussian_bound_constants(ctx.measure, spec);
        auto& t = rep.table("gaussian_bounds.csv",
                            {"alpha", "samples", "C", "c1", "c2", "C_derivative", "c_derivative", "holds"});
        t.row(alpha, g.samples, g.C, g.c1, g.c2, g.C_derivative, g.c_derivative, g.holds);
        CheckResult r;
        r.pass = g.holds && std::isfinite(g.C) && std::isfinite(g.C_derivative);
        const auto& w = g.upper_witness;
        r.witness = "upper bound tightest at (x, y, t) = (" + std::to_string(w.x) + ", " + std::to_string(w.y) + ", " +
                    std::to_string(w.t) + ")";
        r.constants = {{"C", g.C}, {"c1", g.c1}, {"c2", g.c2}, {"C_derivative", g.C_derivative}};
        return r;
    });
}

inline void run_section(Context& ctx, ExperimentReport& rep) {
    rep.run("section", "construction", [&] {
        ctx.section = build_section(ctx.measure, ctx.potential, ctx.config.window);
        const auto& s = *ctx.section;
        auto& t = rep.table("section.csv", {"index", "dyadic", "lo", "hi", "F", "F_parent", "stopping_rule"});
        CheckResult r;
        r.pass = true;
        for (std::size_t i = 0; i < s.intervals.size(); ++i) {
            const auto& I = s.intervals[i];
            const double F = s_functional(ctx.measure, ctx.potential, I);
            const double Fp = s_functional(ctx.measure, ctx.potential, I.parent());
            const bool rule = stopping_rule_holds(ctx.measure, ctx.potential, I);
            t.row(i, I.to_string(), I.lo(), I.hi(), F, Fp, rule);
            if (!rule && r.pass) r.witness = "stopping rule fails on " + I.to_string();
            r.pass = r.pass && rule;
        }
        const auto v = validate_section(s);
        if (!v.ok()) {
            r.pass = false;
            r.witness += (r.witness.empty() ? "" : "; ") + std::string("section validation failed");
            if (v.worst_pair) r.witness += " near " + detail::label(v.worst_pair->first);
        }
        r.constants = {{"intervals", static_cast<double>(s.intervals.size())}, {"C0", v.C0}, {"beta_bound", v.beta_bound}};
        return r;
    });
}

inline void run_semigroup(Context& ctx, ExperimentReport& rep) {
    const auto grid = ctx.grid();
    const Semigroup sg(grid, ctx.potential);
    auto times = ctx.times();
    // A handful of times spread over the grid keeps the stage quick.
    std::vector<double> probe;
    for (std::size_t k = 0; k < times.size(); k += std::max<std::size_t>(1, times.size() / 4)) probe.push_back(times[k]);
    if (probe.back() != times.back()) probe.push_back(times.back());

    rep.run("semigroup", "domination", [&] {
        auto rng = detail::stream(ctx.config, 3);
        auto& t = rep.table("domination.csv", {"trial", "t", "min_K", "max_K_minus_P", "l1_f", "l1_K"});
        CheckResult r;
        r.pass = true;
        double worst = -HUGE_VAL;
        for (int trial = 0; trial < ctx.config.count("domination_trials"); ++trial) {
            const double c = detail::uniform(rng, 0.2, 0.8 * grid->x_max());
            const double w = detail::uniform(rng, 0.05, 2.0);
            const double h = detail::uniform(rng, 0.1, 10.0);
            const auto f = GridFunction::sample(grid, [&](double x) { return h * std::exp(-std::pow((x - c) / w, 2)); });
            const auto K = sg.evolve(f, probe);
            const auto P = sg.evolve(f, probe, true);
            for (std::size_t k = 0; k < probe.size(); ++k) {
                double lo = HUGE_VAL, excess = -HUGE_VAL;
                for (std::size_t i = 0; i < grid->size(); ++i) {
                    lo = std::min(lo, K[k][i]);
                    excess = std::max(excess, K[k][i] - P[k][i]);
                }
                const double l1f = f.integral(), l1k = K[k].integral();
                t.row(trial, probe[k], lo, excess, l1f, l1k);
                const bool ok = lo >= 0.0 && excess <= 0.0 && l1k <= l1f;
                if (!ok && r.pass) r.witness = "trial " + std::to_string(trial) + " at t = " + std::to_string(probe[k]);
                r.pass = r.pass && ok;
                worst = std::max(worst, excess);
            }
        }
        r.constants = {{"max_K_minus_P", worst}};
        return r;
    });

    rep.run("semigroup", "feynman_kac", [&] {
        auto rng = detail::stream(ctx.config, 4);
        auto& t = rep.table("feynman_kac.csv", {"x0", "t", "mc", "stderr", "seed", "n_paths", "n_steps", "grid",
                                                "grid_error", "bound", "pass"});
        const auto paths = static_cast<std::int64_t>(ctx.config.tolerance("mc_paths"));
        const int steps = ctx.config.count("mc_steps");
        const double sigma = ctx.config.tolerance("mc_sigma");
        const double time = std::min(1.0, ctx.config.tgrid.t_max);
        const auto f = [](double x) { return std::exp(-x); };
        const auto fg = GridFunction::sample(grid, f);
        const auto K = sg.apply(time, fg);
        const auto free = sg.apply(time, fg, true);
        const auto exact = heat_apply(ctx.measure, time, fg);
        CheckResult r;
        r.pass = true;
        double worst = 0.0;
        for (int p = 0; p < ctx.config.count("mc_points"); ++p) {
            const double x = detail::uniform(rng, 0.1, std::min(4.0, 0.25 * grid->x_max()));
            const std::size_t i = grid->nearest_node(x);
            const std::uint64_t seed = ctx.config.seed * 1000 + static_cast<std::uint64_t>(p);
            const auto mc = feynman_kac(ctx.potential, time, grid->node(i), f, paths, steps, seed);
            const double grid_error = std::max(ctx.config.tolerance("mc_grid"), std::abs(free[i] - exact[i]));
            const double bound = sigma * mc.stderr_ + 2.0 * grid_error;
            const double diff = std::abs(mc.estimate - K[i]);
            const bool ok = diff <= bound;
            t.row(grid->node(i), time, mc.estimate, mc.stderr_, mc.seed, mc.n_paths, mc.n_steps, K[i], grid_error,
                  bound, ok);
            worst = std::max(worst, diff / bound);
            if (!ok && r.pass) r.witness = "x0 = " + std::to_string(grid->node(i));
            r.pass = r.pass && ok;
        }
        r.constants = {{"max_diff_over_bound", worst}};
        return r;
    });

    rep.run("semigroup", "perturbation", [&] {
        auto rng = detail::stream(ctx.config, 5);
        auto& t = rep.table("perturbation.csv", {"x", "y", "t", "lhs", "rhs", "residual", "tolerance", "pass"});
        const double factor = ctx.config.tolerance("perturbation_factor");
        const double time = std::min(1.0, std::sqrt(ctx.config.tgrid.t_min * ctx.config.tgrid.t_max));
        CheckResult r;
        r.pass = true;
        double worst = 0.0;
        for (int p = 0; p < ctx.config.count("perturbation_points"); ++p) {
            const double hi = std::min(4.0, 0.25 * grid->x_max());
            const std::size_t ix = grid->nearest_node(detail::uniform(rng, 0.2, hi));
            const std::size_t jy = grid->nearest_node(detail::uniform(rng, 0.2, hi));
            const auto pr = perturbation_residual(sg, time, ix, jy, 64);
            const bool ok = pr.residual <= factor * pr.tolerance + 1e-12;
            t.row(grid->node(ix), grid->node(jy), time, pr.lhs, pr.rhs, pr.residual, pr.tolerance, ok);
            worst = std::max(worst, pr.residual / std::max(pr.tolerance, 1e-300));
            if (!ok && r.pass) r.witness = "(x, y) = (" + std::to_string(grid->node(ix)) + ", " +
                                           std::to_string(grid->node(jy)) + ")";
            r.pass = r.pass && ok;
        }
        r.constants = {{"max_residual_over_tolerance", worst}};
        return r;
    });
}

/// Grid fine enough to resolve the smallest interval of the section.
inline GridPtr hardy_grid(const Context& ctx, const ProperSection& s) {
    double smallest = HUGE_VAL;
    for (const auto& I : s.intervals) smallest = std::min(smallest, I.length());
    const double h = std::min(dyadic_spacing(ctx.config.grid.x_max / ctx.config.grid.cells), dyadic_spacing(smallest / 8));
    const double fine_end = std::max(2.0 * h, 1.5 * ctx.config.window.b());
    const double x_max = std::max(ctx.config.grid.x_max, fine_end + 8.0);
    return make_graded_grid(ctx.config.alpha, h, fine_end, x_max, 1.05, 0.25);
}

inline void run_hardy(Context& ctx, ExperimentReport& rep) {
    if (!ctx.section) {
        rep.fail("hardy", "local_atoms", "no section available (section stage failed)");
        rep.fail("hardy", "resupport", "no section available (section stage failed)");
        return;
    }
    const auto& s = *ctx.section;
    const auto grid = hardy_grid(ctx, s);
    const auto picks = sample_intervals(s, ctx.config.count("hardy_intervals"));

    rep.run("hardy", "local_atoms", [&] {
        auto& t = rep.table("hardy_local.csv", {"interval", "tau", "t_min", "norm", "norm_half_range",
                                                "norm_double_range", "norm_double_density"});
        const Potential zero = Potential::zero(ctx.measure);
        std::vector<double> norms;
        for (const auto& D : picks) {
            const Interval I = D.interval();
            const Atom a = Atom::make_local(grid, I);
            const auto h = local_hardy_norm(zero, a.values(), I.length(), resolved_time(a.values()), 8);
            t.row(D.to_string(), I.length(), h.t_min, h.norm, h.norm_half_range, h.norm_double_range,
                  h.norm_double_density);
            norms.push_back(h.norm);
        }
        const double hi = *std::max_element(norms.begin(), norms.end());
        const double lo = *std::min_element(norms.begin(), norms.end());
        const double med = detail::median(norms);
        CheckResult r;
        r.pass = hi < ctx.config.tolerance("hardy_spread") * med;
        r.witness = "max " + std::to_string(hi) + ", median " + std::to_string(med);
        r.constants = {{"min", lo}, {"median", med}, {"max", hi}};
        return r;
    });

    rep.run("hardy", "resupport", [&] {
        auto rng = detail::stream(ctx.config, 6);
        auto& t = rep.table("resupport.csv", {"trial", "host", "support", "N", "lambda", "terms", "certificate",
                                              "reconstruction_error", "atoms_valid"});
        const double beta = s.beta;
        CheckResult r;
        r.pass = true;
        double worst_cert = 0.0, worst_err = 0.0;
        for (int trial = 0; trial < ctx.config.count("resupport_trials"); ++trial) {
            const auto& D = picks[static_cast<std::size_t>(rng() % picks.size())];
            const Interval I = D.interval();
            const Cutoff psi = smoothstep_cutoff(I, beta);
            const Interval outer = psi.outer();
            // One endpoint inside I**, the other outside.
            const double len = I.length() * std::exp2(detail::uniform(rng, -4.0, 2.0));
            double a, b;
            if (outer.a() > 0.0 && (rng() & 1)) {
                b = detail::uniform(rng, outer.a(), outer.b());
                a = std::max(0.0, std::min(b - len, outer.a() - 1e-3 * I.length()));
            } else {
                a = detail::uniform(rng, std::max(outer.a(), 1e-3 * I.length()), outer.b());
                b = std::max(a + len, outer.b() + 1e-3 * I.length());
            }
            b = std::min(b, grid->x_max());
            const Interval J(a, b);
            const double c1 = detail::uniform(rng, -1, 1), c2 = detail::uniform(rng, -1, 1);
            const Atom atom = Atom::make_mu(grid, J, [&](double x) {
                const double u = (x - J.a()) / J.length();
                return c1 * std::sin(3.14159 * u) + c2 * (u > 0.5 ? 1.0 : -1.0);
            });
            const auto res = resupport_atom(atom, I, psi);
            const AtomicCombination combo{res.terms};
            GridFunction target(grid);
            for (std::size_t i = 0; i < grid->size(); ++i) target[i] = psi(grid->node(i)) * atom[i];
            const GridFunction rebuilt = res.terms.empty() ? GridFunction(grid) : atomic_synthesize(combo).function;
            double err = 0.0;
            for (std::size_t i = 0; i < grid->size(); ++i) err = std::max(err, std::abs(rebuilt[i] - target[i]));
            err /= std::max(1.0, target.sup_norm());
            bool valid = true;
            for (const auto& term : res.terms) valid = valid && check_atom(term.atom).ok();
            const double cert = combo.certificate();
            t.row(trial, D.to_string(), detail::label(J), res.N, res.lambda, res.terms.size(), cert, err, valid);
            const bool ok = valid && err <= 1e-12 && cert <= ctx.config.tolerance("resupport_certificate");
            if (!ok && r.pass) r.witness = "trial " + std::to_string(trial) + " on host " + D.to_string();
            r.pass = r.pass && ok;
            worst_cert = std::max(worst_cert, cert);
            worst_err = std::max(worst_err, err);
        }
        r.constants = {{"max_certificate", worst_cert}, {"max_reconstruction_error", worst_err}};
        return r;
    });
}

inline void run_conditions(Context& ctx, ExperimentReport& rep) {
    static const std::vector<std::string> names{"condition_D", "condition_K", "superharmonic", "weak_identity"};
    if (!ctx.section) {
        for (const auto& n : names) rep.fail("conditions", n, "no section available (section stage failed)");
        return;
    }
    const double alpha = ctx.config.alpha;
    const auto picks = sample_intervals(*ctx.section, ctx.config.count("section_samples"));
    auto& fits = rep.table("condition_fits.csv", {"condition", "interval", "exponent", "constant", "threshold",
                                                  "pass", "weak_epsilon", "weak_constant"});

    rep.run("conditions", "condition_D", [&] {
        auto& t = rep.table("condition_D.csv", {"interval", "n", "mass"});
        CheckResult r;
        r.pass = true;
        double worst = -HUGE_VAL;
        for (const auto& D : picks) {
            const Interval I = D.interval();
            const auto grid = condition_grid(alpha, I, 256 * I.length() * I.length());
            const auto f = check_condition_D(ctx.potential, I, I.center(), 8, grid);
            for (const auto& p : f.data) t.row(D.to_string(), p.x, p.value);
            fits.row("D", D.to_string(), f.exponent, f.constant, f.threshold, f.pass, f.weak_epsilon, f.weak_constant);
            worst = std::max(worst, f.exponent);
            if (!f.pass && r.pass) r.witness = D.to_string() + " slope " + std::to_string(f.exponent);
            r.pass = r.pass && f.pass;
        }
        r.constants = {{"max_slope", worst}};
        return r;
    });

    rep.run("conditions", "condition_K", [&] {
        auto& t = rep.table("condition_K.csv", {"interval", "t_over_length_sq", "G"});
        CheckResult r;
        r.pass = true;
        double worst = HUGE_VAL;
        for (const auto& D : picks) {
            const auto f = check_condition_K(ctx.potential, D.interval());
            for (const auto& p : f.data) t.row(D.to_string(), p.x, p.value);
            fits.row("K", D.to_string(), f.exponent, f.constant, f.threshold, f.pass, f.weak_epsilon, f.weak_constant);
            worst = std::min(worst, f.exponent);
            if (!f.pass && r.pass) r.witness = D.to_string() + " exponent " + std::to_string(f.exponent);
            r.pass = r.pass && f.pass;
        }
        r.constants = {{"min_exponent", worst}};
        return r;
    });

    std::vector<SuperharmonicProfile> profiles;
    rep.run("conditions", "superharmonic", [&] {
        auto& t = rep.table("superharmonic.csv", {"interval", "z", "u", "theta", "phi_z"});
        CheckResult r;
        r.pass = true;
        double worst = -HUGE_VAL;
        const double slack = ctx.config.tolerance("superharmonic_slack");
        for (const auto& D : picks) {
            profiles.push_back(find_balanced_J(ctx.measure, ctx.potential, D));
            const Interval I = D.interval();
            const double L2 = I.length() * I.length();
            const auto times = octave_time_grid(1e-3 * L2, 100 * L2, 4);
            const auto grid = condition_grid(alpha, I, 100 * L2);
            const auto s = check_superharmonic(profiles.back(), I.center(), times, grid, scale_free_scheme(), slack);
            for (std::size_t k = 0; k < s.times.size(); ++k) t.row(D.to_string(), s.z, s.times[k], s.theta[k], s.phi_z);
            worst = std::max({worst, s.worst_increase, s.worst_excess});
            if (!s.ok() && r.pass) r.witness = D.to_string() + " at u = " + std::to_string(s.witness_time);
            r.pass = r.pass && s.ok();
        }
        r.constants = {{"worst_relative_increase", worst}};
        return r;
    });

    rep.run("conditions", "weak_identity", [&] {
        if (profiles.empty()) throw Error("no balanced profiles (superharmonic stage failed)");
        auto& t = rep.table("weak_identity.csv", {"interval", "test_function", "residual", "tolerance",
                                                  "gradient_term", "potential_term", "boundary_term"});
        CheckResult r;
        r.pass = true;
        for (const auto& p : profiles) {
            // One bump straddling the right end of J, one reaching the origin.
            const double c = p.J.b(), w = 0.5 * p.J.length(), R = p.J.b() + p.J.length();
            const TestFunction bump{[=](double x) {
                                        const double u = (x - c) / w;
                                        return std::abs(u) < 1 ? std::pow(1 - u * u, 3) : 0.0;
                                    },
                                    [=](double x) {
                                        const double u = (x - c) / w;
                                        return std::abs(u) < 1 ? -6.0 * u * std::pow(1 - u * u, 2) / w : 0.0;
                                    },
                                    Interval(std::max(0.0, c - w), c + w)};
            const TestFunction origin{[=](double x) { return x < R ? std::pow(1 - (x / R) * (x / R), 3) : 0.0; },
                                      [=](double x) {
                                          const double u = x / R;
                                          return x < R ? -6.0 * u * std::pow(1 - u * u, 2) / R : 0.0;
                                      },
                                      Interval(0, R)};
            for (const auto& [name, psi] : {std::pair{"straddling", bump}, std::pair{"origin", origin}}) {
                const auto w8 = phi_equation_residual(p, psi);
                const bool ok = w8.residual < w8.tolerance;
                t.row(p.host.to_string(), name, w8.residual, w8.tolerance, w8.gradient_term, w8.potential_term,
                      w8.boundary_term);
                if (!ok && r.pass) r.witness = p.host.to_string() + " with the " + name + " test function";
                r.pass = r.pass && ok;
            }
        }
        return r;
    });
}

/// Runs the named suite; `all` chains every stage and skips nothing.
inline ExperimentReport run_suite(const RunConfig& config, const std::string& suite) {
    ExperimentReport rep(config);
    std::optional<Context> ctx;
    rep.run("setup", "configuration", [&] {
        ctx.emplace(config);
        CheckResult r;
        r.pass = true;
        return r;
    });
    if (!ctx) return rep;
    const bool all = suite == "all";
    if (all || suite == "kernel") run_kernel(*ctx, rep);
    if (all || suite == "section" || suite == "hardy" || suite == "conditions") run_section(*ctx, rep);
    if (all || suite == "semigroup") run_semigroup(*ctx, rep);
    if (all || suite == "hardy") run_hardy(*ctx, rep);
    if (all || suite == "conditions") run_conditions(*ctx, rep);
    return rep;
}

}  // namespace besselh::cli
