// besselh: run numerical checks of the Bessel heat semigroup and write CSV reports.
//
//   besselh <kernel|section|semigroup|hardy|conditions|all> [flags]
//
// Exit status: 0 when every check passes, 1 when a check fails, 2 on a usage error.

#include <cstdio>
#include <iostream>

#include "suites.hpp"

int main(int argc, char** argv) {
    using namespace besselh::cli;
    CLI::App app{"Numerical checks for the Bessel heat semigroup with a potential", "besselh"};
    app.require_subcommand(1);
    RawFlags raw;
    add_global_flags(app, raw);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Only print the final status line");
    const std::vector<std::pair<std::string, std::string>> suites{
        {"kernel", "Kernel normalization and Gaussian bound constants"},
        {"section", "Proper section from the stopping rule"},
        {"semigroup", "Domination, Monte Carlo cross-check and perturbation identity"},
        {"hardy", "Local atom norms and re-supporting"},
        {"conditions", "Decay conditions and superharmonic profiles"},
        {"all", "Every stage in order"},
    };
    for (const auto& [name, help] : suites) app.add_subcommand(name, help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    const std::string suite = app.get_subcommands().front()->get_name();

    RunConfig config;
    try {
        config = finalize(raw);
        config.potential();  // surfaces file and integrability errors before any work
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const besselh::ParseError& e) {
        std::cerr << (raw.potential_file.empty() ? "--potential: " : "--potential-file: ") << e.what() << '\n';
        return 2;
    } catch (const besselh::Error& e) {
        std::cerr << (raw.potential_file.empty() ? "--potential: " : "--potential-file: ") << e.what() << '\n';
        return 2;
    }

    const ExperimentReport report = run_suite(config, suite);
    try {
        report.write(suite);
    } catch (const std::exception& e) {
        std::cerr << "--out: cannot write report: " << e.what() << '\n';
        return 2;
    }
    for (const auto& c : report.checks()) {
        if (quiet && c.pass) continue;
        std::printf("%-4s %-10s %-16s %7.2fs  %s\n", c.pass ? "ok" : "FAIL", c.stage.c_str(), c.name.c_str(),
                    c.seconds, c.witness.c_str());
    }
    std::printf("%s: %s (%s)\n", suite.c_str(), report.passed() ? "pass" : "FAIL", config.out_dir.c_str());
    return report.passed() ? 0 : 1;
}
