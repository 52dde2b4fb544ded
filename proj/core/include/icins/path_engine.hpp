#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "icins/coefficients.hpp"
#include "icins/time_grid.hpp"

namespace icins {

/// Brownian driver order inside PathIncrements::dw.
enum Driver : std::size_t { kWr = 0, kWn = 1, kWi = 2, kWs = 3, kDrivers = 4 };

/// Increments of one path: dw[step * 4 + driver], counts[step * atoms + atom].
struct PathIncrements {
    std::size_t steps = 0;
    std::size_t atoms = 0;
    std::vector<double> dw;
    std::vector<std::uint32_t> counts;

    double dW(std::size_t step, std::size_t driver) const { return dw[step * kDrivers + driver]; }
    std::uint32_t count(std::size_t step, std::size_t atom) const {
        return counts[step * atoms + atom];
    }
};

/// Brownian and Poisson drivers for a batch of paths.
///
/// Increments are regenerated on demand from counter-based streams, so a DriverPaths object
/// is small and every consumer sees exactly the same numbers (common random numbers).
/// A coarsened view sums blocks of fine increments, which gives nested grids for
/// convergence studies.
class DriverPaths {
public:
    DriverPaths(TimeGrid grid, JumpMeasure jumps, std::uint64_t seed, std::size_t n_paths,
                std::size_t refinement = 1);

    const TimeGrid& grid() const noexcept { return grid_; }
    const JumpMeasure& jumps() const noexcept { return jumps_; }
    std::size_t paths() const noexcept { return n_paths_; }
    std::size_t atoms() const noexcept { return jumps_.size(); }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t refinement() const noexcept { return refinement_; }

    void fill(std::size_t path, PathIncrements& out) const;
    PathIncrements path(std::size_t p) const;

    /// Same drivers on a grid with steps / factor steps.
    DriverPaths coarsened(std::size_t factor) const;

private:
    TimeGrid grid_;
    JumpMeasure jumps_;
    std::uint64_t seed_;
    std::size_t n_paths_;
    std::size_t refinement_;
};

DriverPaths simulate_drivers(const TimeGrid& grid, const JumpMeasure& jumps, std::uint64_t seed,
                             std::size_t n_paths);

/// Asset paths, path-major: value(p, i) = series[p * nodes + i].
struct MarketPaths {
    std::size_t paths = 0;
    std::size_t nodes = 0;
    std::vector<double> I, P_r, P_n, B_r, B_n, S;
    std::vector<double> P_r_star;         // I * P_r
    std::vector<double> B_r_star;         // I * B_r
    std::vector<double> P_r_star_direct;  // Euler on the P_r* SDE
    std::vector<double> B_r_star_direct;  // Euler on the B_r* SDE

    std::size_t index(std::size_t p, std::size_t i) const noexcept { return p * nodes + i; }
};

/// int_a^b r_k(t) dt, exact for piecewise-constant alpha and initial curve.
double spot_rate_integral(const HjmCurve& curve, double a, double b);

MarketPaths simulate_market(const MarketScenario& scenario, const DriverPaths& drivers);

/// Paths [first_path, first_path + count) only; row p of the result is driver path first_path + p.
MarketPaths simulate_market(const MarketScenario& scenario, const DriverPaths& drivers,
                            std::size_t first_path, std::size_t count);

enum class ControlMode { absolute, fractional };

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double clamp(double v) const noexcept { return v < lo ? lo : (v > hi ? hi : v); }
    bool contains(double v) const noexcept { return v >= lo && v <= hi; }
    double width() const noexcept { return hi - lo; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Compact control sets: consumption box C, premium box D, portfolio box Q.
struct ControlBoxes {
    Interval consumption{0.0, 1.0};
    Interval premium{0.0, 1.0};
    std::array<Interval, 3> portfolio{Interval{-1.0, 1.0}, Interval{-1.0, 1.0}, Interval{-1.0, 1.0}};
    friend bool operator==(const ControlBoxes&, const ControlBoxes&) = default;
};

/// theta (or pi), c (or xi), p (or zeta).
struct Controls {
    Vec3 portfolio{};
    double consumption = 0.0;
    double premium = 0.0;
};

Controls clamp_to_boxes(const Controls& c, const ControlBoxes& boxes);

/// Everything a feedback rule may look at.
struct ControlState {
    double t = 0.0;
    std::size_t node = 0;
    std::size_t path = 0;
    double x = 0.0;
    double y = 0.0;
    Vec3 z{};
    std::span<const double> upsilon;
    const LocalCoefficients* coeffs = nullptr;
};

/// Supplies (y, z, upsilon) at a state; implemented by BsdeSolution.
class FeedbackSource {
public:
    virtual ~FeedbackSource() = default;
    /// Fills state.y, state.z and writes upsilon into the buffer, pointing state.upsilon at it.
    virtual void fill(ControlState& state, std::vector<double>& upsilon_buffer) const = 0;
};

struct StrategyRule {
    ControlMode mode = ControlMode::absolute;
    ControlBoxes boxes;
    std::function<Controls(const ControlState&)> rule;
    std::string label;

    /// Rule output projected onto the boxes.
    Controls operator()(const ControlState& s) const { return clamp_to_boxes(rule(s), boxes); }

    static StrategyRule constant(ControlMode mode, const ControlBoxes& boxes, const Controls& c,
                                 std::string label = "constant");
};

/// One node of one simulated wealth path, as seen by a visitor.
struct NodeRecord {
    std::size_t path = 0;
    std::size_t node = 0;
    const ControlState* state = nullptr;
    const Controls* controls = nullptr;
    const LocalCoefficients* coeffs = nullptr;
    const PathIncrements* increments = nullptr;  // step `node` -> `node + 1`; unused at the last node
    bool bankrupt = false;
};

/// Called for every node of every path, possibly from several threads at once
/// (never concurrently for the same path).
using NodeVisitor = std::function<void(const NodeRecord&)>;

enum class FractionalScheme { euler, log_form };

struct WealthPaths {
    TimeGrid grid;
    std::size_t paths = 0;
    std::vector<double> x;  // path-major, nodes per path
    std::vector<std::uint8_t> bankrupt;
    std::vector<std::uint32_t> bankrupt_node;

    std::size_t nodes() const noexcept { return grid.nodes(); }
    double at(std::size_t p, std::size_t i) const noexcept { return x[p * grid.nodes() + i]; }
    double flagged_fraction() const;
};

struct WealthSimulation {
    const Model* model = nullptr;
    const StrategyRule* strategy = nullptr;
    const DriverPaths* drivers = nullptr;
    double x0 = 1.0;
    const FeedbackSource* companion = nullptr;
    FractionalScheme scheme = FractionalScheme::euler;
    NodeVisitor visitor;
    bool store_paths = true;
};

/// Runs the controlled wealth SDE. Absolute mode uses Euler and flags (then freezes) a path at
/// its first negative node; fractional mode uses Euler or the exact log form.
WealthPaths run_wealth(const WealthSimulation& sim);

WealthPaths simulate_wealth(const Model& model, const StrategyRule& strategy,
                            const DriverPaths& drivers, double x0,
                            const FeedbackSource* companion = nullptr);

WealthPaths simulate_wealth_power_logform(const Model& model, const StrategyRule& strategy,
                                          const DriverPaths& drivers, double x0,
                                          const FeedbackSource* companion = nullptr);

/// One step of a local martingale M on the grid: continuous drift (compensators), Brownian
/// part, its quadratic variation over the step, and the jump sizes that occurred.
struct MartingaleStep {
    double drift = 0.0;
    double diffusive = 0.0;
    double quadratic_variation = 0.0;
    std::vector<double> jumps;
};

/// E(M) at the nodes (size steps + 1, starting at 1). Throws DomainError on a jump <= -1.
std::vector<double> stochastic_exponential(std::span<const MartingaleStep> steps);

}  // namespace icins
