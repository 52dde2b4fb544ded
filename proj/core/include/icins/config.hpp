#pragma once

#include <cstdint>
#include <string>

#include "icins/bsde_solver.hpp"
#include "icins/coefficients.hpp"
#include "icins/generator.hpp"
#include "icins/path_engine.hpp"
#include "icins/regression.hpp"

namespace icins {

struct SolverConfig {
    std::size_t steps = 100;
    std::size_t paths = 100000;
    std::uint64_t seed = 1;
    RegressionSpec regression;
    PicardSettings picard;
    std::size_t dump_paths = 10;  // per-path rows written by `simulate`
    friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

struct VerifyConfig {
    std::size_t perturbations = 20;
    double threshold_se = 3.0;    // one-sided tolerance of every Monte Carlo check
    double separation_se = 5.0;   // required gap of the far perturbation
    double drift_tolerance = 1e-6;
    double excursion_tolerance = 1e-8;
    std::size_t drift_samples = 100;
    friend bool operator==(const VerifyConfig&, const VerifyConfig&) = default;
};

/// A parsed experiment file: model, utility, objective, solver and verification settings.
struct ScenarioConfig {
    Model model;
    UtilitySpec utility;
    double x0 = 1.0;
    ControlBoxes boxes;
    SolverConfig solver;
    VerifyConfig verify;

    TimeGrid grid() const { return TimeGrid(model.market.horizon, solver.steps); }
    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Parses the sectioned key = value format. Throws ConfigError carrying the offending
/// line for syntax errors, unknown sections or keys, and malformed values.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);

/// Canonical text: fixed section and key order, numbers with 17 significant digits.
/// parse_config(serialize_config(c)) == c.
std::string serialize_config(const ScenarioConfig& config);

/// 64-bit FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const ScenarioConfig& config);

/// Semantic checks beyond syntax (scenario validation, insurance, boxes, utility). Returns
/// an empty string when the configuration is usable, otherwise one line per problem.
std::string check_config(const ScenarioConfig& config);

}  // namespace icins
