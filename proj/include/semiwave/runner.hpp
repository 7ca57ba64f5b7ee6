#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "semiwave/config.hpp"

namespace semiwave {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitParse = 2,
    kExitValidation = 3,
    kExitProperty = 4,
    kExitInternal = 5,
};

struct Overrides {
    std::optional<std::filesystem::path> out_dir;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
};

/// SEMIWAVE_OUT_DIR and SEMIWAVE_THREADS; malformed values raise ValidationError.
Overrides environment_overrides();

/// Applies env then explicit overrides (explicit wins) and refreshes the config echo.
void apply_overrides(ExperimentConfig& config, const Overrides& env, const Overrides& cli);

struct RunResult {
    int exit_code = kExitOk;
    bool property_passed = true;
    std::string verdict;  // one-line human summary
    Json summary;
    Json manifest;
    std::vector<std::filesystem::path> files;  // artifacts, excluding the manifest itself
};

/// Runs a validated experiment and writes its artifacts plus manifest.json.
/// Library errors propagate; see run_cli for the exit-code mapping.
RunResult run(const ExperimentConfig& config);

/// Full command-line flow: load, override, validate, run, map errors to exit codes.
int run_cli(const std::string& command, const std::filesystem::path& config_path, const Overrides& cli,
            std::ostream& out, std::ostream& err);

}  // namespace semiwave
