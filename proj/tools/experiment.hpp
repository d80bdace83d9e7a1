#pragma once

// Experiment files for the command-line tool: a JSON document mirroring
// SimConfig plus the axes of the sweep and sensitivity experiments.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "greenfarm/simulator.hpp"
#include "json.hpp"

namespace greenfarm::cli {

struct AnalyzeAxis {
    int n_min = 0;
    std::optional<int> n_max;  ///< defaults to capacity
};

struct SweepAxis {
    std::vector<double> lambdas;
    std::vector<PolicySpec> policies;
};

struct SensitivityAxis {
    std::vector<double> errors{0.0, 0.05, 0.10, 0.20};
};

struct ExperimentConfig {
    SimConfig sim;
    int n_current = 0;  ///< starting point for `optimize`
    AnalyzeAxis analyze;
    SweepAxis sweep;
    SensitivityAxis sensitivity;
    nlohmann::json source = nlohmann::json::object();  ///< document as read

    /// FNV-1a over the canonical dump of `source`.
    [[nodiscard]] std::uint64_t hash() const;
    /// Arrival rate used by the analytic commands: mean over the run.
    [[nodiscard]] SystemParams analytic_load(int n) const;
};

/// Parses and validates an experiment document. Relative trace paths are
/// resolved against `base_dir`. Throws ConfigError (unknown key, wrong type,
/// invalid value) or ParseError (malformed trace).
[[nodiscard]] ExperimentConfig parse_experiment(const nlohmann::json& doc,
                                                const std::filesystem::path& base_dir = {});
/// Reads and parses a file; throws ConfigError if it is missing or not JSON.
[[nodiscard]] ExperimentConfig load_experiment(const std::filesystem::path& path);

/// 16 hex digits.
[[nodiscard]] std::string hash_hex(std::uint64_t hash);

}  // namespace greenfarm::cli
