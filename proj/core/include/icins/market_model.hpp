#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "icins/step_function.hpp"

namespace icins {

/// One atom of the jump measure: nu({mark}) = intensity.
struct JumpAtom {
    double mark = 0.0;
    double intensity = 0.0;
    friend bool operator==(const JumpAtom&, const JumpAtom&) = default;
};

/// Finite-activity jump measure. An empty atom list is the pure-diffusion case.
struct JumpMeasure {
    std::vector<JumpAtom> atoms;

    std::size_t size() const noexcept { return atoms.size(); }
    double total_intensity() const;
    friend bool operator==(const JumpMeasure&, const JumpMeasure&) = default;
};

/// Forward-rate curve of one economy. gamma holds one surface per jump atom.
struct HjmCurve {
    StepFunction initial_forward;  // T -> f(0, T)
    StepSurface alpha;             // (t, s) -> alpha(t, s)
    StepSurface sigma;             // (t, s) -> sigma(t, s)
    std::vector<StepSurface> gamma;

    friend bool operator==(const HjmCurve&, const HjmCurve&) = default;
};

struct BondCoefficients {
    double a = 0.0;
    double b = 0.0;
    std::vector<double> c;  // per atom
    double spot_rate = 0.0;
};

struct InflationModel {
    double initial_index = 1.0;
    StepFunction mu;
    StepFunction sigma;
    std::vector<StepFunction> gamma;  // per atom
    friend bool operator==(const InflationModel&, const InflationModel&) = default;
};

struct RiskyAssetModel {
    double initial_price = 1.0;
    StepFunction mu;
    StepFunction sigma;
    std::vector<StepFunction> gamma;  // per atom
    friend bool operator==(const RiskyAssetModel&, const RiskyAssetModel&) = default;
};

struct RealBondDynamics {
    double a_tilde = 0.0;
    std::vector<double> c_tilde;  // per atom
};

/// phi1..phi3 as usually quoted; phi1_net strips the inflation drift from the bond's
/// excess return, which is the ratio that actually multiplies theta1 * b_r in the wealth drift.
struct MarketPricesOfRisk {
    double phi1 = 0.0;
    double phi2 = 0.0;
    double phi3 = 0.0;
    double phi1_net = 0.0;
};

struct MarketScenario {
    HjmCurve real_curve;
    HjmCurve nominal_curve;
    InflationModel inflation;
    RiskyAssetModel risky;
    JumpMeasure jumps;
    StepFunction discount{0.0};
    double horizon = 1.0;
    double bond_maturity = 1.0;

    friend bool operator==(const MarketScenario&, const MarketScenario&) = default;
};

/// Spot rate r_k(t) = f_k(0,t) + int_0^t alpha_k(u,t) du. Exact when sigma_k and gamma_k
/// vanish on maturities below the horizon, which validate_scenario enforces.
double spot_rate(const HjmCurve& curve, double t);

BondCoefficients bond_loading_coefficients(const HjmCurve& curve, const JumpMeasure& jumps,
                                           double t, double maturity);

RealBondDynamics real_bond_dynamics(const BondCoefficients& real_bond, const InflationModel& infl,
                                    const JumpMeasure& jumps, double t);

/// Throws DegenerateMarketError if b_r, sigma_I or sigma_S vanishes at t.
MarketPricesOfRisk market_prices_of_risk(const MarketScenario& scenario, double t,
                                         double maturity);

struct ValidationIssue {
    enum class Severity { error, warning };
    Severity severity = Severity::error;
    std::string field;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const;
    std::size_t error_count() const;
    std::string summary() const;
};

ValidationReport validate_scenario(const MarketScenario& scenario);

}  // namespace icins
