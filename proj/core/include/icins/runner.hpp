#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "icins/config.hpp"

namespace icins {

enum class Command { simulate, solve, value, verify };

Command parse_command(const std::string& name);
std::string command_name(Command c);

/// Process exit codes of a run.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,        // verification checks failed, or an I/O error
    kExitInvalid = 2,        // malformed or invalid configuration
    kExitNotConverged = 3,   // the backward solver did not converge
};

struct RunOptions {
    Command command = Command::verify;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<std::size_t> steps;
    std::string output_dir = ".";
};

struct RunOutputs {
    int exit_code = kExitOk;
    std::vector<std::string> files;  // written files, in order
    std::string config_hash;
};

/// The configuration after command-line overrides.
ScenarioConfig effective_config(const RunOptions& options);

/// Runs one command end to end. Diagnostics go to `err`, the human-readable summary to `out`.
/// Never throws; failures map to exit codes.
RunOutputs run(const RunOptions& options, std::ostream& out, std::ostream& err);

/// Same, on an already parsed configuration (overrides in `options` still apply).
RunOutputs run(const ScenarioConfig& config, const RunOptions& options, std::ostream& out,
               std::ostream& err);

}  // namespace icins
