#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "icins/bsde_solver.hpp"
#include "icins/evaluator.hpp"
#include "icins/generator.hpp"
#include "support/scenarios.hpp"

namespace icins {
namespace {

Model still_model(double rate, double horizon) {
    Model m;
    m.market.horizon = horizon;
    m.market.bond_maturity = horizon;
    m.market.real_curve = testing::flat_curve(rate);
    m.market.nominal_curve = testing::flat_curve(rate);
    m.market.risky.mu = StepFunction(rate);
    m.mortality.horizon = horizon;
    m.contract.premium_ratio = StepFunction(0.02);
    return m;
}

ControlBoxes wide_boxes() {
    ControlBoxes b;
    b.consumption = {-10.0, 10.0};
    b.premium = {-10.0, 10.0};
    b.portfolio = {Interval{-10, 10}, Interval{-10, 10}, Interval{-10, 10}};
    return b;
}

StrategyRule zero_rule(ControlMode mode) { return StrategyRule::constant(mode, wide_boxes(), Controls{}); }

TEST(EstimateValueExponential, QuietMarketClosedForm) {
    const Model m = still_model(0.0, 2.0);
    const DriverPaths d(TimeGrid(2.0, 20), JumpMeasure{}, 1, 10);
    const auto v = estimate_value_exponential(m, zero_rule(ControlMode::absolute), 1.0, 0.7, d);
    EXPECT_NEAR(v.mean, -2.0 - std::exp(-0.7), 1e-13);
    EXPECT_EQ(v.standard_error, 0.0);
    EXPECT_EQ(v.n_paths, 10u);
    EXPECT_EQ(v.flagged_fraction, 0.0);
}

TEST(EstimateValueExponential, LegacyTermVanishesWithoutMortality) {
    Model m = testing::benign_exponential_model();
    m.mortality.hazard = StepFunction(0.0);
    const DriverPaths d(TimeGrid(1.0, 20), JumpMeasure{}, 2, 200);
    Controls c;
    c.consumption = 0.1;
    c.portfolio = {0.2, 0.1, 0.3};
    const auto base = StrategyRule::constant(ControlMode::absolute, wide_boxes(), c);
    c.premium = 0.7;
    const auto with_premium = StrategyRule::constant(ControlMode::absolute, wide_boxes(), c);
    // Without mortality the premium only acts through terminal wealth.
    const auto a = estimate_value_exponential(m, base, 1.0, 1.0, d);
    const auto b = estimate_value_exponential(m, with_premium, 1.0, 1.0, d);
    const auto wa = simulate_wealth(m, base, d, 1.0);
    const auto wb = simulate_wealth(m, with_premium, d, 1.0);
    const auto table = discount_table(m, d.grid());
    double ea = 0.0, eb = 0.0;
    for (std::size_t p = 0; p < d.paths(); ++p) {
        ea += std::exp(-wa.at(p, 20));
        eb += std::exp(-wb.at(p, 20));
    }
    const double dt = 0.05;
    double cons = 0.0;
    for (std::size_t i = 0; i < 20; ++i) cons += 0.5 * dt * (table[i] + table[i + 1]);
    cons *= std::exp(-0.1);
    EXPECT_NEAR(a.mean, -cons - table[20] * ea / 200.0, 1e-12);
    EXPECT_NEAR(b.mean, -cons - table[20] * eb / 200.0, 1e-12);
}

TEST(EstimateValueExponential, StandardErrorScalesWithPaths) {
    const Model m = testing::benign_exponential_model();
    Controls c;
    c.portfolio = {0.5, 0.5, 1.0};
    const auto rule = StrategyRule::constant(ControlMode::absolute, wide_boxes(), c);
    const auto small = estimate_value_exponential(m, rule, 1.0, 1.0, DriverPaths(TimeGrid(1.0, 20), {}, 3, 4000));
    const auto large = estimate_value_exponential(m, rule, 1.0, 1.0, DriverPaths(TimeGrid(1.0, 20), {}, 3, 8000));
    const double ratio = large.standard_error / small.standard_error;
    EXPECT_NEAR(ratio, 1.0 / std::sqrt(2.0), 0.2 / std::sqrt(2.0));
}

TEST(EstimateValuePower, RiskFreeGrowthClosedForm) {
    const Model m = still_model(0.03, 5.0);
    const DriverPaths d(TimeGrid(5.0, 50), JumpMeasure{}, 1, 4);
    const auto v = estimate_value_power(m, zero_rule(ControlMode::fractional), 0.5, 2.0, d);
    EXPECT_NEAR(v.mean, std::pow(2.0 * std::exp(0.15), 0.5) / 0.5, 1e-12);
}

TEST(EstimateValuePower, TerminalOnlyAtUnitWealth) {
    // Zero consumption and no mortality leave only the terminal term X(T)^k / k = 1 / k.
    const Model m = still_model(0.0, 1.0);
    const DriverPaths d(TimeGrid(1.0, 10), JumpMeasure{}, 1, 3);
    EXPECT_NEAR(estimate_value_power(m, zero_rule(ControlMode::fractional), 0.25, 1.0, d).mean, 4.0, 1e-14);
}

TEST(EstimateValuePower, InsuranceTermMatchesHandQuadrature) {
    // zeta = 0 and lambda = eta: the legacy integrand is lambda X^k.
    Model m = still_model(0.02, 2.0);
    m.mortality.hazard = StepFunction(0.02);
    m.contract.premium_ratio = StepFunction(0.02);
    m.market.discount = StepFunction(0.01);
    Controls c;
    c.consumption = 0.1;
    const auto rule = StrategyRule::constant(ControlMode::fractional, wide_boxes(), c);
    const std::size_t n = 40;
    const DriverPaths d(TimeGrid(2.0, n), JumpMeasure{}, 1, 2);
    const double k = 0.5, dt = 2.0 / n;
    // Log-form wealth: X(t) = exp((r - xi) t) exactly.
    double integral = 0.0;
    const auto f = [&](double t) {
        const double x = std::exp((0.02 - 0.1) * t);
        return std::exp(-0.03 * t) * (std::pow(0.1, k) + 0.02) * std::pow(x, k);
    };
    for (std::size_t i = 0; i < n; ++i) integral += 0.5 * dt * (f(i * dt) + f((i + 1) * dt));
    const double expected = integral / k + std::exp(-0.06) * std::pow(std::exp(-0.16), k) / k;
    EXPECT_NEAR(estimate_value_power(m, rule, k, 1.0, d).mean, expected, 1e-12);
}

TEST(EstimateValuePower, MonotoneInInitialWealth) {
    const Model m = testing::constant_power_model();
    Controls c;
    c.consumption = 0.05;
    c.portfolio = {0.3, 0.2, 0.5};
    const auto rule = StrategyRule::constant(ControlMode::fractional, testing::constant_power_boxes(), c);
    const DriverPaths d(TimeGrid(10.0, 50), JumpMeasure{}, 4, 500);
    double prev = -1e300;
    for (double x0 : {0.5, 1.0, 2.0, 4.0}) {
        const double v = estimate_value_power(m, rule, 0.5, x0, d).mean;
        EXPECT_GT(v, prev);
        prev = v;
    }
}

struct PowerFixture {
    Model model = testing::constant_power_model();
    ControlBoxes boxes = testing::constant_power_boxes();
    UtilitySpec utility = UtilitySpec::power(0.5);
    BsdeSolution solution = solve_ode_power(model, 0.5, boxes, TimeGrid(10.0, 100));
};

std::vector<DriftState> sample_states(std::size_t count, std::size_t steps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> node(0, steps - 1);
    std::uniform_real_distribution<double> x(0.2, 5.0);
    std::vector<DriftState> s(count);
    for (auto& st : s) st = {node(rng), x(rng)};
    return s;
}

TEST(DriftResidual, VanishesAtTheOptimum) {
    const PowerFixture f;
    const auto states = sample_states(100, 100, 1);
    const auto rep = drift_residual(f.model, f.utility, f.boxes, f.solution, nullptr, states);
    ASSERT_EQ(rep.values.size(), 100u);
    EXPECT_LE(rep.rms_residual_at_optimum, 1e-6);
    for (double v : rep.optimum_values) EXPECT_LE(std::abs(v), 1e-6);
}

TEST(DriftResidual, RandomControlsNeverHavePositiveDrift) {
    const PowerFixture f;
    const auto states = sample_states(100, 100, 2);
    std::mt19937_64 rng(3);
    const auto draw = [&](const Interval& i) { return std::uniform_real_distribution<double>(i.lo, i.hi)(rng); };
    std::vector<Controls> controls(states.size());
    for (auto& u : controls) {
        for (int k = 0; k < 3; ++k) u.portfolio[k] = draw(f.boxes.portfolio[k]);
        u.consumption = draw(f.boxes.consumption);
        u.premium = draw(f.boxes.premium);
    }
    const auto rep = drift_residual_controls(f.model, f.utility, f.boxes, f.solution, states, controls);
    EXPECT_LE(rep.max_positive_excursion, 1e-8);
    for (double v : rep.values) EXPECT_LE(v, 1e-8);
}

TEST(DriftResidual, PerturbedPortfolioDriftsDown) {
    const PowerFixture f;
    const auto states = sample_states(20, 100, 4);
    const StrategyRule opt = optimal_strategy(f.utility, f.boxes);
    StrategyRule bumped = opt;
    bumped.rule = [opt](const ControlState& s) {
        Controls u = opt(s);
        u.portfolio[2] += 0.3;
        return u;
    };
    const auto rep = drift_residual(f.model, f.utility, f.boxes, f.solution, &bumped, states);
    for (double v : rep.values) EXPECT_LT(v, 0.0);
}

TEST(ValueFormula, ZeroSolutionGivesTerminalUtility) {
    const auto zero = BsdeSolution::deterministic(TimeGrid(1.0, 4), 0, std::vector<double>(5, 0.0));
    EXPECT_DOUBLE_EQ(value_formula(UtilitySpec::exponential(2.0), zero, 0.4), -std::exp(-0.8));
    EXPECT_DOUBLE_EQ(value_formula(UtilitySpec::power(0.5), zero, 4.0), 4.0);
}

TEST(ValueFormula, PowerScalesWithInitialWealth) {
    const PowerFixture f;
    EXPECT_NEAR(value_formula(f.utility, f.solution, 4.0) / value_formula(f.utility, f.solution, 1.0),
                2.0, 1e-14);
}

TEST(ValueConsistency, PowerRatioIsInvariantUnderScaling) {
    const PowerFixture f;
    const DriverPaths d(TimeGrid(10.0, 100), JumpMeasure{}, 6, 2000);
    const auto a = value_consistency(f.model, f.utility, f.boxes, f.solution, 1.0, d);
    const auto b = value_consistency(f.model, f.utility, f.boxes, f.solution, 9.0, d);
    // The optimal fractions do not depend on x0, so the simulated values scale exactly.
    EXPECT_NEAR(b.estimate.mean / a.estimate.mean, 3.0, 1e-10);
    EXPECT_NEAR(b.v_formula / a.v_formula, 3.0, 1e-12);
    EXPECT_NEAR(a.discrepancy_se, b.discrepancy_se, 1e-8);
}

TEST(SupermartingaleCheck, FarConstantStrategyIsSeparated) {
    const PowerFixture f;
    const DriverPaths d(TimeGrid(10.0, 100), JumpMeasure{}, 8, 4000);
    Controls far;
    far.consumption = 1.0;
    far.portfolio = {-2.0, 2.0, -2.0};
    const std::vector<StrategyRule> s{optimal_strategy(f.utility, f.boxes),
                                      StrategyRule::constant(ControlMode::fractional, f.boxes, far, "far")};
    const auto rep = supermartingale_check(f.model, f.utility, f.solution, s, 1.0, d);
    ASSERT_EQ(rep.strategies.size(), 2u);
    EXPECT_LT(rep.strategies[1].gap, -5.0 * rep.strategies[1].standard_error);
    EXPECT_EQ(rep.strategies[1].label, "far");
    EXPECT_EQ(rep.positivity_violations, 0u);
}

TEST(SupermartingaleCheck, ZeroNoiseGapIsDeterministicAndFirstOrder) {
    Model m = still_model(0.03, 2.0);
    m.mortality.hazard = StepFunction(0.01);
    m.market.discount = StepFunction(0.02);
    const ControlBoxes b = testing::constant_power_boxes();
    const UtilitySpec u = UtilitySpec::power(0.5);
    std::vector<double> gaps;
    for (std::size_t n : {100u, 200u, 400u}) {
        const auto sol = solve_ode_power(m, 0.5, b, TimeGrid(2.0, n));
        const DriverPaths d(TimeGrid(2.0, n), JumpMeasure{}, 1, 3);
        const std::vector<StrategyRule> s{optimal_strategy(u, b)};
        const auto rep = supermartingale_check(m, u, sol, s, 1.0, d);
        EXPECT_EQ(rep.strategies[0].standard_error, 0.0);
        gaps.push_back(rep.strategies[0].gap);
    }
    // Only the time discretization of the running reward remains.
    EXPECT_NEAR(gaps[0] / gaps[1], 2.0, 0.1);
    EXPECT_NEAR(gaps[1] / gaps[2], 2.0, 0.1);
}

TEST(BmoDiagnostics, ZeroPortfolioHasNoQuadraticVariation) {
    const Model m = testing::benign_exponential_model();
    const DriverPaths d(TimeGrid(1.0, 10), JumpMeasure{}, 1, 20);
    const auto loads = collect_loadings(m, UtilitySpec::exponential(1.0), zero_rule(ControlMode::absolute), 1.0, d);
    const auto diag = bmo_diagnostics(loads);
    EXPECT_EQ(diag.bmo_constant_estimate, 0.0);
    EXPECT_EQ(diag.positivity_violations, 0u);
}

TEST(BmoDiagnostics, ConstantLoadingGivesDeterministicQuadraticVariation) {
    const Model m = testing::benign_exponential_model();
    const DriverPaths d(TimeGrid(1.0, 10), JumpMeasure{}, 1, 20);
    Controls c;
    c.portfolio = {1.0, -0.5, 2.0};
    const auto rule = StrategyRule::constant(ControlMode::absolute, wide_boxes(), c);
    const double delta = 1.5;
    const auto diag = bmo_diagnostics(collect_loadings(m, UtilitySpec::exponential(delta), rule, 1.0, d));
    const auto lc = local_coefficients(m, 0.0);
    const Vec3 v = lc.loading(c.portfolio);
    const double bound = delta * delta * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) * 1.0;
    EXPECT_NEAR(diag.bmo_constant_estimate, bound, 1e-12);
}

TEST(BmoDiagnostics, CountsJumpsAtOrBelowMinusOne) {
    LoadingPaths l;
    l.paths = 1;
    l.steps = 2;
    l.dt = 0.5;
    l.rate = {1.0, 2.0};
    l.jump_sizes = {-0.5, -1.0, 0.3, -1.2};
    const auto d = bmo_diagnostics(l);
    EXPECT_DOUBLE_EQ(d.bmo_constant_estimate, 1.5);
    EXPECT_EQ(d.positivity_violations, 2u);
}

TEST(ExponentBoundCheck, PowerOptimumStaysWithinBound) {
    const PowerFixture f;
    const DriverPaths d(TimeGrid(10.0, 50), JumpMeasure{}, 2, 300);
    const auto chk = exponent_bound_check(f.model, f.utility, optimal_strategy(f.utility, f.boxes), 1.0, d, &f.solution);
    EXPECT_EQ(chk.violations, 0u);
    EXPECT_LE(chk.max_ratio, 1.0);
    EXPECT_GT(chk.max_abs, 0.0);
}

TEST(ExponentBoundCheck, ExponentialConstantStrategyStaysWithinBound) {
    const Model m = testing::benign_exponential_model();
    const ControlBoxes b = testing::benign_exponential_boxes();
    Controls c;
    c.consumption = 2.0;
    c.premium = -0.5;
    c.portfolio = {3.0, -3.0, 3.0};
    const auto rule = StrategyRule::constant(ControlMode::absolute, b, c);
    const DriverPaths d(TimeGrid(1.0, 20), JumpMeasure{}, 2, 300);
    const auto chk = exponent_bound_check(m, UtilitySpec::exponential(1.0), rule, 1.0, d);
    EXPECT_EQ(chk.violations, 0u);
}

}  // namespace
}  // namespace icins
