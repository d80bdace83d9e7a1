#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "experiment.hpp"

namespace greenfarm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct RunOptions {
    std::filesystem::path out_dir = ".";
    std::optional<std::uint64_t> seed;  ///< overrides the config seed
    std::size_t replications = 1;
};

// Each command writes its artifacts under out_dir and a short summary to `out`.
void cmd_analyze(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out);
void cmd_optimize(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out);
void cmd_simulate(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out);
void cmd_sweep(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out);
void cmd_sensitivity(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out);

/// Full command line (without the program name). Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace greenfarm::cli
