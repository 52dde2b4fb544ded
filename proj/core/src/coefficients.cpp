#include "icins/coefficients.hpp"

namespace icins {

LocalCoefficients market_coefficients(const MarketScenario& sc, double t) {
    const auto bond = bond_loading_coefficients(sc.real_curve, sc.jumps, t, sc.bond_maturity);
    const auto real = real_bond_dynamics(bond, sc.inflation, sc.jumps, t);

    LocalCoefficients lc;
    lc.t = t;
    lc.r = bond.spot_rate;
    lc.a_tilde = real.a_tilde;
    lc.mu_i = sc.inflation.mu(t);
    lc.mu_s = sc.risky.mu(t);
    lc.scale = {bond.b, sc.inflation.sigma(t), sc.risky.sigma(t)};
    lc.net_excess = {real.a_tilde - lc.r - lc.mu_i, lc.mu_i, lc.mu_s - lc.r};
    for (int i = 0; i < 3; ++i) {
        lc.degenerate[i] = lc.scale[i] == 0.0;
        lc.psi[i] = lc.degenerate[i] ? 0.0 : lc.net_excess[i] / lc.scale[i];
    }
    const std::size_t n = sc.jumps.size();
    lc.weights.resize(n);
    lc.gamma_hat.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        lc.weights[j] = sc.jumps.atoms[j].intensity;
        lc.gamma_hat[j] = {real.c_tilde[j], sc.inflation.gamma[j](t), sc.risky.gamma[j](t)};
    }
    lc.discount = sc.discount(t);
    return lc;
}

LocalCoefficients local_coefficients(const Model& model, double t) {
    LocalCoefficients lc = market_coefficients(model.market, t);
    lc.hazard = model.mortality.hazard(t);
    lc.premium_ratio = model.contract.premium_ratio(t);
    return lc;
}

std::vector<LocalCoefficients> coefficient_table(const Model& model, const TimeGrid& grid) {
    std::vector<LocalCoefficients> out;
    out.reserve(grid.nodes());
    for (std::size_t i = 0; i < grid.nodes(); ++i) out.push_back(local_coefficients(model, grid.time(i)));
    return out;
}

}  // namespace icins
