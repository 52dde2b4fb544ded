#pragma once

#include <string>

#include "icins/step_function.hpp"

namespace icins {

/// Force of mortality lambda(t) on [0, horizon].
struct MortalityCurve {
    StepFunction hazard{0.0};
    double horizon = 1.0;
    friend bool operator==(const MortalityCurve&, const MortalityCurve&) = default;
};

/// Premium-insurance ratio eta(t): a premium rate p buys a death benefit p / eta.
struct InsuranceContract {
    StepFunction premium_ratio{1.0};
    friend bool operator==(const InsuranceContract&, const InsuranceContract&) = default;
};

/// exp(-int_0^t lambda). Throws DomainError outside [0, horizon].
double survival_probability(const MortalityCurve& mort, double t);

/// lambda(t) * survival_probability(t).
double death_density(const MortalityCurve& mort, double t);

/// x + p / eta(t). Throws DomainError when eta(t) <= 0.
double legacy(double x, double p, const InsuranceContract& contract, double t);

/// exp(-int_{t0}^{t1} (rho + lambda)), the combined discount and survival weight.
double discount_survival_factor(const StepFunction& discount, const MortalityCurve& mort,
                                double t0, double t1);

/// Empty string when the curve and contract are usable, otherwise a description.
std::string validate_insurance(const MortalityCurve& mort, const InsuranceContract& contract);

}  // namespace icins
