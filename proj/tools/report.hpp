#pragma once

// Check results, CSV tables and the summary sidecar.

#include <chrono>
#include <deque>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "besselh/error.hpp"
#include "run_config.hpp"

namespace besselh::cli {

/// Library error type as shown in reports.
inline std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const DegeneratePotential*>(&e)) return "DegeneratePotential";
    if (dynamic_cast<const NonLocallyIntegrable*>(&e)) return "NonLocallyIntegrable";
    if (dynamic_cast<const SupportViolation*>(&e)) return "SupportViolation";
    if (dynamic_cast<const CutoffViolation*>(&e)) return "CutoffViolation";
    if (dynamic_cast<const BalanceUnreachable*>(&e)) return "BalanceUnreachable";
    if (dynamic_cast<const MixedGrids*>(&e)) return "MixedGrids";
    if (dynamic_cast<const QuadratureError*>(&e)) return "QuadratureError";
    if (dynamic_cast<const FeynmanKacError*>(&e)) return "FeynmanKacError";
    if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
    if (dynamic_cast<const Error*>(&e)) return "Error";
    if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
    return "exception";
}

struct CheckResult {
    std::string stage;
    std::string name;
    bool pass = false;
    std::string witness;  ///< what failed, or the worst case seen
    std::vector<std::pair<std::string, double>> constants;
    double seconds = 0.0;
};

/// A CSV file assembled in memory; cells are written with 17 significant digits
/// so bodies are reproducible byte for byte.
class Table {
public:
    Table(std::string file, std::vector<std::string> header) : file_(std::move(file)), header_(std::move(header)) {}

    template <class... Cells>
    void row(const Cells&... cells) {
        std::ostringstream os;
        os.precision(17);
        bool first = true;
        ((os << (first ? "" : ",") << cell(cells), first = false), ...);
        rows_.push_back(os.str());
    }

    const std::string& file() const noexcept { return file_; }
    std::size_t size() const noexcept { return rows_.size(); }

    std::string body() const {
        std::string out;
        for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
        out += '\n';
        for (const auto& r : rows_) out += r + '\n';
        return out;
    }

private:
    template <class T>
    static auto cell(const T& v) {
        if constexpr (std::is_same_v<T, bool>) {
            return v ? std::string("1") : std::string("0");
        } else if constexpr (std::is_convertible_v<T, std::string>) {
            return quote(std::string(v));
        } else {
            return v;
        }
    }

    static std::string quote(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + '"';
    }

    std::string file_;
    std::vector<std::string> header_;
    std::vector<std::string> rows_;
};

class ExperimentReport {
public:
    explicit ExperimentReport(RunConfig config) : config_(std::move(config)) {}

    const RunConfig& config() const noexcept { return config_; }

    /// Runs one check, timing it and turning any exception into a failure.
    void run(const std::string& stage, const std::string& name, const std::function<CheckResult()>& body) {
        const auto start = std::chrono::steady_clock::now();
        CheckResult r;
        try {
            r = body();
        } catch (const std::exception& e) {
            r.pass = false;
            r.witness = error_kind(e) + ": " + e.what();
        }
        r.stage = stage;
        r.name = name;
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        checks_.push_back(std::move(r));
    }

    void fail(const std::string& stage, const std::string& name, const std::string& why) {
        checks_.push_back({stage, name, false, why, {}, 0.0});
    }

    Table& table(const std::string& file, std::vector<std::string> header) {
        tables_.emplace_back(file, std::move(header));
        return tables_.back();
    }

    bool passed() const {
        for (const auto& c : checks_)
            if (!c.pass) return false;
        return !checks_.empty();
    }

    const std::vector<CheckResult>& checks() const noexcept { return checks_; }

    nlohmann::ordered_json summary(const std::string& suite) const {
        nlohmann::ordered_json j;
        const std::time_t now = std::time(nullptr);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        j["generated_at"] = stamp;
        j["suite"] = suite;
        j["config"] = {{"alpha", config_.alpha},
                       {"potential", config_.potential_file.empty() ? config_.potential_text : config_.potential_file},
                       {"window", {config_.window.a(), config_.window.b()}},
                       {"grid", {config_.grid.cells, config_.grid.x_max, config_.grid.ratio}},
                       {"tgrid", {config_.tgrid.t_min, config_.tgrid.t_max, config_.tgrid.per_octave}},
                       {"seed", config_.seed},
                       {"tol", config_.tol},
                       {"args", config_.echo()}};
        auto& list = j["checks"] = nlohmann::ordered_json::array();
        for (const auto& c : checks_) {
            nlohmann::ordered_json e{{"stage", c.stage}, {"name", c.name}, {"pass", c.pass},
                                     {"witness", c.witness}, {"seconds", c.seconds}};
            auto& k = e["constants"] = nlohmann::ordered_json::object();
            for (const auto& [name, v] : c.constants) k[name] = v;
            list.push_back(std::move(e));
        }
        j["files"] = nlohmann::ordered_json::array();
        for (const auto& t : tables_) j["files"].push_back(t.file());
        j["pass"] = passed();
        return j;
    }

    void write(const std::string& suite) const {
        namespace fs = std::filesystem;
        const fs::path dir(config_.out_dir);
        fs::create_directories(dir);
        for (const auto& t : tables_) std::ofstream(dir / t.file()) << t.body();
        std::ofstream(dir / "summary.json") << summary(suite).dump(2) << '\n';
    }

private:
    RunConfig config_;
    std::vector<CheckResult> checks_;
    std::deque<Table> tables_;  // stable references for table()
};

}  // namespace besselh::cli
