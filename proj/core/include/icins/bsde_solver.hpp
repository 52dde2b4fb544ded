#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "icins/generator.hpp"
#include "icins/path_engine.hpp"
#include "icins/regression.hpp"
#include "icins/time_grid.hpp"

namespace icins {

struct PicardSettings {
    double damping = 0.5;  // weight of the new fit, in (0, 1]
    int max_iterations = 50;
    double tolerance = 1e-6;  // on sup over nodes and paths of |Delta Y|
    void validate() const;
    friend bool operator==(const PicardSettings&, const PicardSettings&) = default;
};

/// Cross-path summary of the solution at one node.
struct NodeSummary {
    double y_mean = 0.0;
    double y_sd = 0.0;
    Vec3 z_mean{};
    std::vector<double> upsilon_mean;
};

/// Solution (Y, Z, Upsilon) of the backward equation on a grid.
///
/// Deterministic mode stores Y per node with Z = 0 and Upsilon = 0. Per-path mode stores,
/// per node, a regression fit of (Y, Z1, Z2, Z3, Upsilon_1..J) on the wealth, which is how
/// the solution acts as a feedback source for the forward simulation.
class BsdeSolution final : public FeedbackSource {
public:
    enum class Mode { deterministic, per_path };

    BsdeSolution() = default;
    static BsdeSolution deterministic(TimeGrid grid, std::size_t atoms, std::vector<double> y);
    static BsdeSolution per_path(TimeGrid grid, std::size_t atoms, std::vector<RegressionFit> fits);

    Mode mode() const noexcept { return mode_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t atoms() const noexcept { return atoms_; }
    std::size_t nodes() const noexcept { return grid_.nodes(); }

    double y(std::size_t node, double x) const;
    Vec3 z(std::size_t node, double x) const;
    double upsilon(std::size_t node, std::size_t atom, double x) const;
    /// Deterministic Y values (empty in per-path mode).
    const std::vector<double>& y_values() const noexcept { return y_; }
    const std::vector<RegressionFit>& fits() const noexcept { return fits_; }

    void fill(ControlState& state, std::vector<double>& upsilon_buffer) const override;

    std::vector<NodeSummary> summary;
    std::vector<double> picard_trace;
    int iterations = 0;
    bool converged = true;
    bool saturated = false;
    bool regression_degenerate = false;
    bool hazard_clamped = false;

private:
    Mode mode_ = Mode::deterministic;
    TimeGrid grid_;
    std::size_t atoms_ = 0;
    std::vector<double> y_;
    std::vector<RegressionFit> fits_;
};

/// h(t, y) of a scalar backward ODE dY/dt = -h(t, Y).
using ScalarGenerator = std::function<double(double t, double y)>;

/// Classical RK4 backward from Y(T) = 0; returns Y at every node.
std::vector<double> solve_ode_backward(const TimeGrid& grid, const ScalarGenerator& h);

/// Deterministic power solution: Y' = -h1(t, Y, 0, 0, 0, 0).
BsdeSolution solve_ode_power(const Model& model, double kappa, const ControlBoxes& boxes,
                             const TimeGrid& grid);

/// Pointwise generator override for tests: h(coefficients, inputs).
using GeneratorOverride = std::function<double(const LocalCoefficients&, const GeneratorInputs&)>;

struct FbsdeProblem {
    Model model;
    UtilitySpec utility;
    ControlBoxes boxes;
    TimeGrid grid;
    double x0 = 1.0;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 1;
    RegressionSpec regression;
    PicardSettings picard;
    GeneratorOverride generator_override;  // empty: the utility's own generator
};

struct FbsdeResult {
    BsdeSolution solution;
    WealthPaths wealth;  // forward paths of the final iteration
};

/// Regression Monte Carlo with damped Picard iteration over the forward wealth.
FbsdeResult solve_fbsde(const FbsdeProblem& problem);

FbsdeResult solve_fbsde_exponential(const Model& model, double delta, const ControlBoxes& boxes,
                                    const TimeGrid& grid, double x0, std::size_t n_paths,
                                    const RegressionSpec& regression, const PicardSettings& picard,
                                    std::uint64_t seed);

FbsdeResult solve_fbsde_power(const Model& model, double kappa, const ControlBoxes& boxes,
                              const TimeGrid& grid, double x0, std::size_t n_paths,
                              const RegressionSpec& regression, const PicardSettings& picard,
                              std::uint64_t seed);

}  // namespace icins
