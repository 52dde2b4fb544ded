#include "icins/mortality.hpp"

#include <cmath>

#include "icins/error.hpp"

namespace icins {

namespace {

void check_time(const MortalityCurve& mort, double t, const char* op) {
    if (!(t >= 0.0 && t <= mort.horizon))
        throw DomainError(std::string(op) + ": time " + std::to_string(t) + " outside [0, " +
                          std::to_string(mort.horizon) + "]");
}

}  // namespace

double survival_probability(const MortalityCurve& mort, double t) {
    check_time(mort, t, "survival_probability");
    return std::exp(-mort.hazard.integral(0.0, t));
}

double death_density(const MortalityCurve& mort, double t) {
    check_time(mort, t, "death_density");
    return mort.hazard(t) * std::exp(-mort.hazard.integral(0.0, t));
}

double legacy(double x, double p, const InsuranceContract& contract, double t) {
    const double eta = contract.premium_ratio(t);
    if (!(eta > 0.0)) throw DomainError("legacy: premium-insurance ratio must be positive");
    return x + p / eta;
}

double discount_survival_factor(const StepFunction& discount, const MortalityCurve& mort,
                                double t0, double t1) {
    return std::exp(-(discount.integral(t0, t1) + mort.hazard.integral(t0, t1)));
}

std::string validate_insurance(const MortalityCurve& mort, const InsuranceContract& contract) {
    if (!(mort.horizon > 0.0)) return "mortality horizon must be positive";
    if (mort.hazard.inf() < 0.0) return "hazard must be nonnegative";
    if (contract.premium_ratio.inf() <= 0.0) return "premium_ratio must be positive";
    return {};
}

}  // namespace icins
