#pragma once

#include <span>

#include "icins/box_newton.hpp"
#include "icins/coefficients.hpp"
#include "icins/path_engine.hpp"

namespace icins {

struct UtilitySpec {
    enum class Kind { exponential, power };
    Kind kind = Kind::power;
    double delta = 1.0;  // U(x) = -exp(-delta x)
    double kappa = 0.5;  // U(x) = x^kappa / kappa

    static UtilitySpec exponential(double delta) { return {Kind::exponential, delta, 0.5}; }
    static UtilitySpec power(double kappa) { return {Kind::power, 1.0, kappa}; }
    /// Throws DomainError on delta <= 0, kappa >= 1 or kappa == 0.
    void validate() const;
    friend bool operator==(const UtilitySpec&, const UtilitySpec&) = default;
};

/// Pointwise arguments of a generator. upsilon has one entry per jump atom.
struct GeneratorInputs {
    double t = 0.0;
    double x = 0.0;  // wealth; only the exponential generator reads it
    double y = 0.0;
    Vec3 z{};
    std::span<const double> upsilon;
};

struct OptimalControls {
    Vec3 portfolio{};          // theta or pi
    double consumption = 0.0;  // c or xi
    double premium = 0.0;      // p or zeta
    double minimand_value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = true;
    bool saturated = false;       // an exponent hit the cap
    bool hazard_clamped = false;  // lambda == 0 pushed the premium to the lower edge

    Controls controls() const { return {portfolio, consumption, premium}; }
};

enum class GeneratorForm {
    inf_form,         // infima of the drift, the reference implementation
    closed_form,      // explicit consumption/premium infima substituted, as derived
    printed_literal,  // the published display taken verbatim
};

struct GeneratorValue {
    double value = 0.0;
    OptimalControls controls;
};

/// Exponents are capped at this argument; crossing it sets a saturation flag.
inline constexpr double kExponentCap = 700.0;
double capped_exp(double a, bool* saturated = nullptr);

/// (e^{delta x} - 1 - delta x) / delta.
double m_function(double x, double delta);

// Exponential utility ------------------------------------------------------------------------

/// delta/2 sum_i (v_i - z_i - psi_i/delta)^2 + sum_z w_z m(upsilon_z - <theta, gamma_hat_z>).
/// A slot with zero volatility contributes -u_i * net_excess_i + delta/2 z_i^2 instead.
double theta_minimand_exponential(const Vec3& theta, const GeneratorInputs& in,
                                  const LocalCoefficients& lc, double delta,
                                  bool* saturated = nullptr);

OptimalControls argmin_theta_exponential(const GeneratorInputs& in, const LocalCoefficients& lc,
                                         double delta, const Box3& box,
                                         const NewtonSettings& settings = {});

struct ClosedFormPortfolio {
    Vec3 foc{};      // solves the first-order conditions of the minimand
    Vec3 printed{};  // the published no-jump corollary
};

/// Requires no active jump atom and nonzero b_r, sigma_I, sigma_S.
ClosedFormPortfolio closed_form_theta_nojump_exponential(const GeneratorInputs& in,
                                                         const LocalCoefficients& lc, double delta);

/// c* = x - y, the minimizer of (1/delta) e^{delta(x-y-c)} + c, clamped to the box.
double optimal_consumption_exponential(double x, double y, double delta, const Interval& box);
/// The published c* = x - y + ln(delta)/delta.
double printed_consumption_exponential(double x, double y, double delta);

struct PremiumChoice {
    double value = 0.0;
    bool hazard_clamped = false;
};

/// p* = eta [ln(lambda/eta)/delta - y], the minimizer of (lambda/delta) e^{-delta(y+p/eta)} + p,
/// clamped to the box; lambda == 0 gives the lower edge and sets the flag.
PremiumChoice optimal_premium_exponential(double y, double delta, double hazard, double eta,
                                          const Interval& box);
/// The published p* = eta [ln(delta lambda/eta)/delta - y].
double printed_premium_exponential(double y, double delta, double hazard, double eta);

/// The expression whose infimum over controls is the generator; the drift of the
/// verification process is delta D e^{-delta(x-y)} (h - lambda_exponential).
double lambda_exponential(const GeneratorInputs& in, const LocalCoefficients& lc, double delta,
                          const Controls& u, bool* saturated = nullptr);

GeneratorValue generator_exponential(const GeneratorInputs& in, const LocalCoefficients& lc,
                                     double delta, const ControlBoxes& boxes,
                                     GeneratorForm form = GeneratorForm::inf_form);

// Power utility ------------------------------------------------------------------------------

/// Convex form of the portfolio part:
/// (1-k)/2 sum_i (v_i - (z_i+psi_i)/(1-k))^2 - (1/k) sum_z w_z [(1+g)^k e^u - 1 - k g - u],
/// g = <pi, gamma_hat_z>. +infinity where some active atom has 1 + g <= 0.
double theta_minimand_power(const Vec3& pi, const GeneratorInputs& in, const LocalCoefficients& lc,
                            double kappa, bool* saturated = nullptr);

OptimalControls argmin_theta_power(const GeneratorInputs& in, const LocalCoefficients& lc,
                                   double kappa, const Box3& box,
                                   const NewtonSettings& settings = {});

ClosedFormPortfolio closed_form_pi_nojump(const GeneratorInputs& in, const LocalCoefficients& lc,
                                          double kappa);

struct FractionChoice {
    double xi = 0.0;
    double zeta = 0.0;
    bool hazard_clamped = false;
};

/// xi* = e^{-y/(1-k)}, zeta* = eta[(eta/lambda)^{-1/(1-k)} e^{-y/(1-k)} - 1], clamped to boxes.
FractionChoice optimal_fractions_power(double y, double kappa, double hazard, double eta,
                                       const ControlBoxes& boxes);

/// F(controls); the drift of the verification process is D X^k e^y (F - h1/k), h1 = k sup F.
double power_drift_objective(const GeneratorInputs& in, const LocalCoefficients& lc, double kappa,
                             const Controls& u, bool* saturated = nullptr);

GeneratorValue generator_power(const GeneratorInputs& in, const LocalCoefficients& lc, double kappa,
                               const ControlBoxes& boxes,
                               GeneratorForm form = GeneratorForm::inf_form);

// Either utility ------------------------------------------------------------------------------

/// Generator value and optimal controls for the given utility (inf form).
GeneratorValue generator(const UtilitySpec& utility, const GeneratorInputs& in,
                         const LocalCoefficients& lc, const ControlBoxes& boxes,
                         GeneratorForm form = GeneratorForm::inf_form);

/// Feedback rule returning the generator's optimal controls at the state's (x, y, z, upsilon).
/// Absolute mode for exponential utility, fractional mode for power utility.
StrategyRule optimal_strategy(const UtilitySpec& utility, const ControlBoxes& boxes);

}  // namespace icins
