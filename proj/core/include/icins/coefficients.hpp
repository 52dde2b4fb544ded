#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "icins/market_model.hpp"
#include "icins/mortality.hpp"
#include "icins/time_grid.hpp"

namespace icins {

using Vec3 = std::array<double, 3>;

/// Everything the control problem needs: market, mortality and the insurance contract.
struct Model {
    MarketScenario market;
    MortalityCurve mortality;
    InsuranceContract contract;
    friend bool operator==(const Model&, const Model&) = default;
};

/// Market, mortality and contract coefficients frozen at one time.
///
/// Portfolio exposures live in three "slots": slot 1 is W_r with scale b_r, slot 2 is W_I
/// with scale sigma_I (fed by theta1 + theta2), slot 3 is W_S with scale sigma_S. In slot
/// form the mean excess return is sum_i u_i * net_excess_i with u = (theta1, theta1 + theta2,
/// theta3), and the Brownian loading is v_i = u_i * scale_i.
struct LocalCoefficients {
    double t = 0.0;
    double r = 0.0;
    double a_tilde = 0.0;
    double mu_i = 0.0;
    double mu_s = 0.0;
    Vec3 scale{};         // (b_r, sigma_I, sigma_S)
    Vec3 net_excess{};    // (A~ - r - mu_I, mu_I, mu_S - r)
    Vec3 psi{};           // net_excess / scale; 0 on a slot whose scale vanishes
    std::array<bool, 3> degenerate{};  // scale_i == 0
    std::vector<double> weights;       // jump intensities per atom
    std::vector<Vec3> gamma_hat;       // (C~, gamma_I, gamma_S) per atom
    double discount = 0.0;
    double hazard = 0.0;
    double premium_ratio = 1.0;

    std::size_t atoms() const noexcept { return weights.size(); }
    /// mu_hat = (A~ - r, mu_I, mu_S - r).
    Vec3 excess() const noexcept { return {a_tilde - r, mu_i, mu_s - r}; }
    static Vec3 slots(const Vec3& theta) noexcept {
        return {theta[0], theta[0] + theta[1], theta[2]};
    }
    Vec3 loading(const Vec3& theta) const noexcept {
        const Vec3 u = slots(theta);
        return {u[0] * scale[0], u[1] * scale[1], u[2] * scale[2]};
    }
    double mean_excess(const Vec3& theta) const noexcept {
        const Vec3 u = slots(theta);
        return u[0] * net_excess[0] + u[1] * net_excess[1] + u[2] * net_excess[2];
    }
    double jump_exposure(const Vec3& theta, std::size_t atom) const noexcept {
        const Vec3& g = gamma_hat[atom];
        return theta[0] * g[0] + theta[1] * g[1] + theta[2] * g[2];
    }
};

/// Market part only (hazard 0, premium ratio 1).
LocalCoefficients market_coefficients(const MarketScenario& scenario, double t);

LocalCoefficients local_coefficients(const Model& model, double t);

/// local_coefficients at every grid node.
std::vector<LocalCoefficients> coefficient_table(const Model& model, const TimeGrid& grid);

}  // namespace icins
