#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "icins/error.hpp"
#include "icins/generator.hpp"
#include "support/oracles.hpp"

namespace icins {
namespace {

using testing::golden_section_min;
using testing::grid_search_min;

/// Coefficients with market prices of risk phi on the three slots, r = 0 and raw drifts
/// consistent with phi (mu_I is the slot-2 excess).
LocalCoefficients slot_coefficients(const Vec3& scale, const Vec3& phi) {
    LocalCoefficients lc;
    lc.scale = scale;
    for (int i = 0; i < 3; ++i) {
        lc.degenerate[i] = scale[i] == 0.0;
        lc.psi[i] = lc.degenerate[i] ? 0.0 : phi[i];
        lc.net_excess[i] = phi[i] * scale[i];
    }
    lc.mu_i = lc.net_excess[1];
    lc.a_tilde = lc.r + lc.mu_i + lc.net_excess[0];
    lc.mu_s = lc.r + lc.net_excess[2];
    lc.hazard = 0.02;
    lc.premium_ratio = 0.04;
    return lc;
}

void add_atom(LocalCoefficients& lc, double weight, const Vec3& gamma_hat) {
    lc.weights.push_back(weight);
    lc.gamma_hat.push_back(gamma_hat);
}

const Box3 kWideBox{Interval{-50, 50}, Interval{-50, 50}, Interval{-50, 50}};

ControlBoxes wide_boxes() {
    ControlBoxes b;
    b.consumption = {-100, 100};
    b.premium = {-100, 100};
    b.portfolio = kWideBox;
    return b;
}

testing::Bounds3 bounds(const Box3& b) {
    return {std::pair{b[0].lo, b[0].hi}, std::pair{b[1].lo, b[1].hi}, std::pair{b[2].lo, b[2].hi}};
}

TEST(MFunction, Values) {
    EXPECT_EQ(m_function(0.0, 3.0), 0.0);
    EXPECT_NEAR(m_function(1.0, 1.0), std::exp(1.0) - 2.0, 1e-15);
    EXPECT_NEAR(m_function(1e-9, 2.0), 1e-18, 1e-25);
}

TEST(ThetaMinimandExponential, VanishesWhenEveryBracketVanishes) {
    const double delta = 2.0;
    const auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0.1, 0.2, 0.25});
    GeneratorInputs in;
    in.z = {0.01, -0.02, 0.03};
    // v_i = z_i + psi_i / delta with v = (theta1 b_r, (theta1+theta2) sigma_I, theta3 sigma_S)
    const double t1 = (in.z[0] + 0.1 / delta) / 0.04;
    const double t12 = (in.z[1] + 0.2 / delta) / 0.01;
    const double t3 = (in.z[2] + 0.25 / delta) / 0.2;
    EXPECT_NEAR(theta_minimand_exponential({t1, t12 - t1, t3}, in, lc, delta), 0.0, 1e-28);
}

TEST(ThetaMinimandExponential, HandEvaluatedAtZero) {
    const auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0.1, 0.2, 0.25});
    const GeneratorInputs in;
    EXPECT_NEAR(theta_minimand_exponential({0, 0, 0}, in, lc, 2.0), (0.01 + 0.04 + 0.0625) / 4.0, 1e-15);
}

TEST(ArgminThetaExponential, NoJumpsMatchesFirstOrderConditions) {
    const double delta = 1.7;
    const auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0.1, 0.2, 0.25});
    GeneratorInputs in;
    in.z = {0.002, -0.001, 0.01};
    const auto opt = argmin_theta_exponential(in, lc, delta, kWideBox);
    EXPECT_TRUE(opt.converged);
    const double t1 = (in.z[0] + 0.1 / delta) / 0.04;
    const double t2 = (in.z[1] + 0.2 / delta) / 0.01 - t1;
    const double t3 = (in.z[2] + 0.25 / delta) / 0.2;
    EXPECT_NEAR(opt.portfolio[0], t1, 1e-8);
    EXPECT_NEAR(opt.portfolio[1], t2, 1e-8);
    EXPECT_NEAR(opt.portfolio[2], t3, 1e-8);
    const auto cf = closed_form_theta_nojump_exponential(in, lc, delta);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(cf.foc[i], opt.portfolio[i], 1e-8);
}

TEST(ArgminThetaExponential, ZeroPricesAndLoadingsGiveZero) {
    const auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0, 0, 0});
    const auto opt = argmin_theta_exponential(GeneratorInputs{}, lc, 1.0, kWideBox);
    for (double p : opt.portfolio) EXPECT_NEAR(p, 0.0, 1e-14);
}

TEST(ArgminThetaExponential, OneAtomMatchesGridSearch) {
    const double delta = 1.5;
    auto lc = slot_coefficients({0.1, 0.1, 0.3}, {0.2, 0.3, 0.25});
    add_atom(lc, 0.8, {-0.3, 0.2, -0.4});
    std::vector<double> ups{0.05};
    GeneratorInputs in;
    in.z = {0.01, 0.02, -0.03};
    in.upsilon = ups;
    const Box3 box{Interval{-5, 5}, Interval{-5, 5}, Interval{-5, 5}};
    const auto opt = argmin_theta_exponential(in, lc, delta, box);
    const auto oracle = grid_search_min(
        [&](const testing::Point3& p) { return theta_minimand_exponential({p[0], p[1], p[2]}, in, lc, delta); },
        bounds(box), 41, 30);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(opt.portfolio[i], oracle[i], 1e-6);
}

TEST(ArgminThetaExponential, ActiveFaceSatisfiesKkt) {
    const auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0.1, 0.2, 0.25});
    const Box3 box{Interval{-1, 1}, Interval{-1, 1}, Interval{-1, 1}};
    const auto opt = argmin_theta_exponential(GeneratorInputs{}, lc, 1.0, box);
    EXPECT_DOUBLE_EQ(opt.portfolio[0], 1.0);
    EXPECT_DOUBLE_EQ(opt.portfolio[2], 1.0);
    EXPECT_LE(opt.gradient_norm, 1e-10);
}

TEST(ClosedFormThetaExponential, HandEvaluatedStockWeight) {
    LocalCoefficients lc = slot_coefficients({0.04, 0.01, 0.2}, {0, 0, 0.05 / 0.2});
    const auto cf = closed_form_theta_nojump_exponential(GeneratorInputs{}, lc, 2.0);
    EXPECT_NEAR(cf.foc[2], 0.625, 1e-15);
}

TEST(ClosedFormThetaExponential, ZeroExcessReturnsGiveZero) {
    const auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0, 0, 0});
    const auto cf = closed_form_theta_nojump_exponential(GeneratorInputs{}, lc, 2.0);
    for (double v : cf.foc) EXPECT_EQ(v, 0.0);
}

TEST(ClosedFormThetaExponential, PrintedCorollaryAtReconcilingPoint) {
    const LocalCoefficients lc = slot_coefficients({0.04, 0.01, 0.2}, {0.1, 0.0, 0.25});
    GeneratorInputs in;
    in.z = {0.003, 0.004, -0.002};
    const auto cf = closed_form_theta_nojump_exponential(in, lc, 1.0);
    for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(cf.foc[i], cf.printed[i]);
}

TEST(ClosedFormThetaExponential, DegenerateLoadingThrows) {
    const auto lc = slot_coefficients({0.04, 0.0, 0.2}, {0.1, 0.0, 0.25});
    EXPECT_THROW(closed_form_theta_nojump_exponential(GeneratorInputs{}, lc, 1.0), Error);
}

TEST(OptimalConsumptionExponential, UnitRiskAversion) {
    EXPECT_DOUBLE_EQ(optimal_consumption_exponential(2.0, 0.5, 1.0, Interval{-10, 10}), 1.5);
    EXPECT_DOUBLE_EQ(printed_consumption_exponential(2.0, 0.5, 1.0), 1.5);
    EXPECT_DOUBLE_EQ(optimal_consumption_exponential(2.0, 0.5, 1.0, Interval{0, 1}), 1.0);
}

TEST(OptimalPremiumExponential, EqualHazardAndRatio) {
    const auto p = optimal_premium_exponential(0.3, 1.0, 0.04, 0.04, Interval{-10, 10});
    EXPECT_NEAR(p.value, -0.04 * 0.3, 1e-17);
    EXPECT_FALSE(p.hazard_clamped);
}

TEST(OptimalPremiumExponential, ZeroHazardClampsToLowerEdge) {
    const auto p = optimal_premium_exponential(0.3, 2.0, 0.0, 0.04, Interval{-0.5, 1.0});
    EXPECT_EQ(p.value, -0.5);
    EXPECT_TRUE(p.hazard_clamped);
}

TEST(ScalarControlsExponential, MatchGoldenSectionOracle) {
    const double delta = 2.0, x = 1.0, y = 0.3, lam = 0.02, eta = 0.04;
    const double c_oracle = golden_section_min(
        [&](double c) { return std::exp(delta * (x - y - c)) / delta + c; }, -5.0, 5.0);
    const double p_oracle = golden_section_min(
        [&](double p) { return lam / delta * std::exp(-delta * (y + p / eta)) + p; }, -5.0, 5.0);
    // A derivative-free search locates a smooth minimum only to about sqrt(machine epsilon).
    EXPECT_NEAR(optimal_consumption_exponential(x, y, delta, Interval{-10, 10}), c_oracle, 1e-7);
    EXPECT_NEAR(optimal_premium_exponential(y, delta, lam, eta, Interval{-10, 10}).value, p_oracle, 1e-7);
}

TEST(GeneratorExponential, ZeroMarketEqualsSumOfScalarMinima) {
    const double delta = 1.0, lam = 0.03;
    LocalCoefficients lc = slot_coefficients({0, 0, 0}, {0, 0, 0});
    lc.hazard = lam;
    lc.premium_ratio = lam;
    GeneratorInputs in;
    in.x = 0.8;
    in.y = 0.1;
    const double c_min = golden_section_min(
        [&](double c) { return std::exp(delta * (in.x - in.y - c)) / delta + c; }, -5.0, 5.0);
    const double p_min = golden_section_min(
        [&](double p) { return lam / delta * std::exp(-delta * (in.y + p / lam)) + p; }, -5.0, 5.0);
    const double scalar = (std::exp(delta * (in.x - in.y - c_min)) / delta + c_min) +
                          (lam / delta * std::exp(-delta * (in.y + p_min / lam)) + p_min);
    const auto h = generator_exponential(in, lc, delta, wide_boxes());
    EXPECT_NEAR(h.value, scalar - lam / delta, 1e-12);
}

TEST(GeneratorExponential, ThetaInfimumVanishesWithoutRiskPremia) {
    const auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0, 0, 0});
    const auto h = generator_exponential(GeneratorInputs{}, lc, 1.0, wide_boxes());
    EXPECT_NEAR(h.controls.minimand_value, 0.0, 1e-20);
}

TEST(GeneratorExponential, InfAndClosedFormsAgreeAtUnitRiskAversion) {
    auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0.1, 0.2, 0.25});
    lc.r = 0.03;
    lc.discount = 0.02;
    GeneratorInputs in;
    in.x = 1.3;
    in.y = 0.2;
    in.z = {0.01, 0.0, -0.02};
    const auto a = generator_exponential(in, lc, 1.0, wide_boxes(), GeneratorForm::inf_form);
    const auto b = generator_exponential(in, lc, 1.0, wide_boxes(), GeneratorForm::closed_form);
    const auto c = generator_exponential(in, lc, 1.0, wide_boxes(), GeneratorForm::printed_literal);
    EXPECT_NEAR(a.value, b.value, 1e-12);
    EXPECT_NEAR(a.value, c.value, 1e-12);
}

TEST(GeneratorExponential, PrintedFormDiffersAwayFromUnitRiskAversion) {
    auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0.1, 0.2, 0.25});
    GeneratorInputs in;
    in.y = 0.2;
    const auto a = generator_exponential(in, lc, 2.0, wide_boxes(), GeneratorForm::inf_form);
    const auto c = generator_exponential(in, lc, 2.0, wide_boxes(), GeneratorForm::printed_literal);
    EXPECT_GT(std::abs(a.value - c.value), 1e-3);
}

TEST(ArgminThetaPower, NoPremiaGiveZero) {
    const auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0, 0, 0});
    const auto opt = argmin_theta_power(GeneratorInputs{}, lc, 0.5, kWideBox);
    for (double p : opt.portfolio) EXPECT_NEAR(p, 0.0, 1e-14);
}

TEST(ArgminThetaPower, HandEvaluatedStockFraction) {
    const auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0, 0, 0.05 / 0.2});
    const auto opt = argmin_theta_power(GeneratorInputs{}, lc, 0.5, kWideBox);
    EXPECT_NEAR(opt.portfolio[2], 2.5, 1e-10);
    EXPECT_NEAR(closed_form_pi_nojump(GeneratorInputs{}, lc, 0.5).foc[2], 2.5, 1e-14);
}

TEST(ArgminThetaPower, NoJumpsMatchesFirstOrderConditions) {
    const double kappa = -1.5;
    const auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0.1, 0.2, 0.25});
    GeneratorInputs in;
    in.z = {0.002, -0.001, 0.01};
    const auto opt = argmin_theta_power(in, lc, kappa, kWideBox);
    const auto cf = closed_form_pi_nojump(in, lc, kappa);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(opt.portfolio[i], cf.foc[i], 1e-8);
    EXPECT_NEAR(cf.foc[2] * 0.2, (in.z[2] + 0.25) / (1.0 - kappa), 1e-15);
}

TEST(ArgminThetaPower, OneAtomMatchesGridSearch) {
    const double kappa = 0.4;
    auto lc = slot_coefficients({0.1, 0.1, 0.3}, {0.2, 0.3, 0.25});
    add_atom(lc, 0.8, {-0.1, 0.05, -0.2});
    std::vector<double> ups{0.03};
    GeneratorInputs in;
    in.z = {0.01, 0.02, -0.03};
    in.upsilon = ups;
    const Box3 box{Interval{-3, 3}, Interval{-3, 3}, Interval{-3, 3}};
    const auto opt = argmin_theta_power(in, lc, kappa, box);
    const auto oracle = grid_search_min(
        [&](const testing::Point3& p) { return theta_minimand_power({p[0], p[1], p[2]}, in, lc, kappa); },
        bounds(box), 41, 30);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(opt.portfolio[i], oracle[i], 1e-6);
}

TEST(ArgminThetaPower, JumpFeasibilityIsABarrier) {
    auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0, 0, 2.0});
    add_atom(lc, 1.0, {0, 0, -0.5});
    std::vector<double> ups{0.0};
    GeneratorInputs in;
    in.upsilon = ups;
    const auto opt = argmin_theta_power(in, lc, 0.5, kWideBox);
    EXPECT_GT(1.0 - 0.5 * opt.portfolio[2], 0.0);
    EXPECT_LT(opt.portfolio[2], 2.0);
}

TEST(OptimalFractionsPower, Values) {
    ControlBoxes b = wide_boxes();
    EXPECT_DOUBLE_EQ(optimal_fractions_power(0.0, 0.5, 0.02, 0.04, b).xi, 1.0);
    EXPECT_NEAR(optimal_fractions_power(0.0, 0.5, 0.03, 0.03, b).zeta, 0.0, 1e-17);
    EXPECT_NEAR(optimal_fractions_power(0.2, 0.5, 0.02, 0.04, b).xi, 0.6703200460356393, 1e-15);
    const auto z = optimal_fractions_power(0.2, 0.5, 0.0, 0.04, b);
    EXPECT_TRUE(z.hazard_clamped);
    EXPECT_EQ(z.zeta, b.premium.lo);
}

TEST(GeneratorPower, ZeroMarketEqualsScalarOptimaSum) {
    const double kappa = 0.5, lam = 0.05;
    LocalCoefficients lc = slot_coefficients({0.04, 0.01, 0.2}, {0, 0, 0});
    lc.hazard = lam;
    lc.premium_ratio = lam;
    const double xi = golden_section_min([&](double v) { return -(std::pow(v, kappa) / kappa - v); }, 1e-9, 10.0);
    const double zeta = golden_section_min(
        [&](double v) { return -(lam * std::pow(1.0 + v / lam, kappa) / kappa - v); }, -lam + 1e-12, 10.0);
    const double sup = (std::pow(xi, kappa) / kappa - xi) + (lam * std::pow(1.0 + zeta / lam, kappa) / kappa - zeta);
    const auto h = generator_power(GeneratorInputs{}, lc, kappa, wide_boxes());
    EXPECT_NEAR(h.value, kappa * (sup - lam / kappa), 1e-12);
}

TEST(GeneratorPower, InfAndClosedFormsAgreeWithAllInputsZero) {
    LocalCoefficients lc = slot_coefficients({0.0, 0.0, 0.0}, {0, 0, 0});
    lc.hazard = 0.02;
    lc.premium_ratio = 0.02;
    const auto a = generator_power(GeneratorInputs{}, lc, 0.5, wide_boxes(), GeneratorForm::inf_form);
    const auto b = generator_power(GeneratorInputs{}, lc, 0.5, wide_boxes(), GeneratorForm::closed_form);
    EXPECT_NEAR(a.value, b.value, 1e-9);
}

TEST(GeneratorPower, SlotPermutationSymmetry) {
    const auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0.1, 0.2, 0.25});
    const auto swapped = slot_coefficients({0.2, 0.01, 0.04}, {0.25, 0.2, 0.1});
    GeneratorInputs in, in_swapped;
    in.y = 0.1;
    in.z = {0.01, 0.02, 0.03};
    in_swapped.y = 0.1;
    in_swapped.z = {0.03, 0.02, 0.01};
    const auto a = generator_power(in, lc, 0.5, wide_boxes());
    const auto b = generator_power(in_swapped, swapped, 0.5, wide_boxes());
    EXPECT_NEAR(a.value, b.value, 1e-12);
}

TEST(UtilitySpec, RejectsInvalidParameters) {
    EXPECT_THROW(UtilitySpec::exponential(0.0).validate(), DomainError);
    EXPECT_THROW(UtilitySpec::power(1.0).validate(), DomainError);
    EXPECT_THROW(UtilitySpec::power(0.0).validate(), DomainError);
    EXPECT_NO_THROW(UtilitySpec::power(-2.0).validate());
}

TEST(CappedExp, SaturationIsReported) {
    bool sat = false;
    EXPECT_EQ(capped_exp(1.0, &sat), std::exp(1.0));
    EXPECT_FALSE(sat);
    EXPECT_EQ(capped_exp(1000.0, &sat), std::exp(kExponentCap));
    EXPECT_TRUE(sat);
}

TEST(OptimalStrategy, RulesWithDifferentUtilitiesDoNotShareSolves) {
    const auto lc = slot_coefficients({0.04, 0.01, 0.2}, {0.1, 0.2, 0.25});
    ControlBoxes boxes = wide_boxes();
    ControlState s;
    s.x = 1.0;
    s.coeffs = &lc;
    const Controls power = optimal_strategy(UtilitySpec::power(0.5), boxes)(s);
    const Controls expo = optimal_strategy(UtilitySpec::exponential(2.0), boxes)(s);
    const auto direct = argmin_theta_exponential(GeneratorInputs{}, lc, 2.0, boxes.portfolio);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(expo.portfolio[i], direct.portfolio[i]);
    EXPECT_NE(power.portfolio[2], expo.portfolio[2]);
    boxes.portfolio[2] = {-0.5, 0.5};
    EXPECT_EQ(optimal_strategy(UtilitySpec::exponential(2.0), boxes)(s).portfolio[2], 0.5);
}

}  // namespace
}  // namespace icins
