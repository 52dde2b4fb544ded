#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "icins/bsde_solver.hpp"
#include "icins/generator.hpp"
#include "icins/path_engine.hpp"
#include "icins/stats.hpp"

namespace icins {

struct ValueEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::size_t n_paths = 0;          // paths entering the mean
    double flagged_fraction = 0.0;    // bankruptcy-flagged paths, excluded from the mean
    std::vector<double> samples;      // per path; NaN on flagged paths
};

/// exp(-int_0^{t_i} (discount + hazard)) at every node, exact for piecewise-constant rates.
std::vector<double> discount_table(const Model& model, const TimeGrid& grid);

/// -int D [e^{-delta c} + lambda e^{-delta l}] ds - D(T) e^{-delta X(T)}, l = X + p / eta.
ValueEstimate estimate_value_exponential(const Model& model, const StrategyRule& strategy,
                                         double delta, double x0, const DriverPaths& drivers,
                                         const FeedbackSource* companion = nullptr);

/// (1/k) int D [xi^k + lambda (1 + zeta/eta)^k] X^k ds + D(T) X(T)^k / k on log-form wealth.
ValueEstimate estimate_value_power(const Model& model, const StrategyRule& strategy, double kappa,
                                   double x0, const DriverPaths& drivers,
                                   const FeedbackSource* companion = nullptr);

ValueEstimate estimate_value(const Model& model, const UtilitySpec& utility,
                             const StrategyRule& strategy, double x0, const DriverPaths& drivers,
                             const FeedbackSource* companion = nullptr);

/// Mean and standard error of a - b over paths valid in both.
MeanSe paired_difference(const ValueEstimate& a, const ValueEstimate& b);

/// Drift of the verification process at one state under the given controls, where
/// `generator_value` is h (exponential) or h1 (power) at the same (t, x, y, z, upsilon):
/// exponential delta D e^{-delta(x-y)} (h - Lambda(u)); power D x^k e^y (F(u) - h1/k).
double drift_value(const UtilitySpec& utility, const LocalCoefficients& lc,
                   const GeneratorInputs& in, const Controls& u, double generator_value,
                   double discount_factor);

struct DriftState {
    std::size_t node = 0;
    double x = 1.0;
};

struct DriftReport {
    std::vector<double> values;           // drift under the tested strategy, per sample
    std::vector<double> optimum_values;   // drift under the generator's optimal controls
    double max_positive_excursion = 0.0;  // max(0, max values)
    double rms_residual_at_optimum = 0.0;
};

/// Evaluates the drift at sampled states, with (y, z, upsilon) read from the solution.
/// A null strategy tests the optimal controls.
DriftReport drift_residual(const Model& model, const UtilitySpec& utility, const ControlBoxes& boxes,
                           const BsdeSolution& solution, const StrategyRule* strategy,
                           std::span<const DriftState> samples);

/// As drift_residual, with explicit controls per sample (controls.size() == samples.size()).
DriftReport drift_residual_controls(const Model& model, const UtilitySpec& utility,
                                    const ControlBoxes& boxes, const BsdeSolution& solution,
                                    std::span<const DriftState> samples,
                                    std::span<const Controls> controls);

struct StrategyGap {
    std::string label;
    double gap = 0.0;  // E[R(T)] - R(0)
    double standard_error = 0.0;
    ValueEstimate value;
    std::vector<double> node_increment_mean;  // mean of R(t_{i+1}) - R(0)
    std::vector<double> node_increment_se;
    double worst_increment_z = 0.0;  // max |mean| / se over nodes with se > 0
};

struct VerificationReport {
    std::vector<StrategyGap> strategies;
    double v_formula = 0.0;
    double value_consistency_se = 0.0;  // |V_formula - J_MC| / SE under the first strategy
    double bmo_constant_estimate = 0.0;
    std::size_t positivity_violations = 0;
};

/// R(0) from the theorem: -e^{-delta(x0 - Y0)} or (x0^k / k) e^{Y0}.
double value_formula(const UtilitySpec& utility, const BsdeSolution& solution, double x0);

/// For each strategy (on the same drivers) estimates E[R(T)] - R(0) and the mean
/// node increments of R. The first strategy is treated as the optimum for value consistency.
VerificationReport supermartingale_check(const Model& model, const UtilitySpec& utility,
                                         const BsdeSolution& solution,
                                         std::span<const StrategyRule> strategies, double x0,
                                         const DriverPaths& drivers);

struct ConsistencyEntry {
    double v_formula = 0.0;
    ValueEstimate estimate;
    double discrepancy_se = 0.0;
};

ConsistencyEntry value_consistency(const Model& model, const UtilitySpec& utility,
                                   const ControlBoxes& boxes, const BsdeSolution& solution,
                                   double x0, const DriverPaths& drivers);

/// Quadratic-variation rate and realized jumps of the martingale inside the stochastic
/// exponential of the verification argument, along simulated paths.
struct LoadingPaths {
    std::size_t paths = 0;
    std::size_t steps = 0;
    double dt = 0.0;
    std::vector<double> rate;         // path-major, per step: |loading|^2 + sum w jump^2
    std::vector<double> jump_sizes;   // every realized jump, counted with multiplicity
};

LoadingPaths collect_loadings(const Model& model, const UtilitySpec& utility,
                              const StrategyRule& strategy, double x0, const DriverPaths& drivers,
                              const FeedbackSource* companion = nullptr);

struct BmoDiagnostics {
    double bmo_constant_estimate = 0.0;  // sup over nodes and paths of the remaining QV
    std::size_t positivity_violations = 0;  // realized jumps <= -1
};

BmoDiagnostics bmo_diagnostics(const LoadingPaths& loadings);

/// K (exponential) or Q (power) along paths against the bound implied by the boxes and
/// coefficient bounds. K contains r X, so its bound uses each path's running sup of |X|.
struct ExponentCheck {
    double max_abs = 0.0;
    double max_ratio = 0.0;  // max |K| / bound over nodes and paths
    std::size_t violations = 0;
};

ExponentCheck exponent_bound_check(const Model& model, const UtilitySpec& utility,
                                   const StrategyRule& strategy, double x0,
                                   const DriverPaths& drivers,
                                   const FeedbackSource* companion = nullptr);

}  // namespace icins
