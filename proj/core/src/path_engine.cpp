#include "icins/path_engine.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "icins/error.hpp"
#include "icins/parallel.hpp"
#include "icins/rng.hpp"

namespace icins {

DriverPaths::DriverPaths(TimeGrid grid, JumpMeasure jumps, std::uint64_t seed,
                         std::size_t n_paths, std::size_t refinement)
    : grid_(grid), jumps_(std::move(jumps)), seed_(seed), n_paths_(n_paths), refinement_(refinement) {
    if (n_paths_ == 0) throw DomainError("DriverPaths: need at least one path");
    if (refinement_ == 0) throw DomainError("DriverPaths: refinement must be positive");
}

void DriverPaths::fill(std::size_t path, PathIncrements& out) const {
    const std::size_t n = grid_.steps;
    const std::size_t m = refinement_;
    const std::size_t atoms = jumps_.size();
    const double fine_dt = grid_.dt() / static_cast<double>(m);
    out.steps = n;
    out.atoms = atoms;
    out.dw.assign(n * kDrivers, 0.0);
    out.counts.assign(n * atoms, 0);

    for (std::size_t k = 0; k < kDrivers; ++k) {
        CounterRng rng(seed_, path, k);
        std::normal_distribution<double> normal(0.0, std::sqrt(fine_dt));
        for (std::size_t s = 0; s < n; ++s) {
            double acc = 0.0;
            for (std::size_t f = 0; f < m; ++f) acc += normal(rng);
            out.dw[s * kDrivers + k] = acc;
        }
    }
    for (std::size_t j = 0; j < atoms; ++j) {
        const double mean = jumps_.atoms[j].intensity * fine_dt;
        if (!(mean > 0.0)) continue;
        CounterRng rng(seed_, path, kDrivers + j);
        std::poisson_distribution<std::uint32_t> poisson(mean);
        for (std::size_t s = 0; s < n; ++s) {
            std::uint32_t acc = 0;
            for (std::size_t f = 0; f < m; ++f) acc += poisson(rng);
            out.counts[s * atoms + j] = acc;
        }
    }
}

PathIncrements DriverPaths::path(std::size_t p) const {
    PathIncrements out;
    fill(p, out);
    return out;
}

DriverPaths DriverPaths::coarsened(std::size_t factor) const {
    if (factor == 0 || grid_.steps % factor != 0)
        throw DomainError("DriverPaths::coarsened: factor must divide the step count");
    return DriverPaths(TimeGrid(grid_.horizon, grid_.steps / factor), jumps_, seed_, n_paths_,
                       refinement_ * factor);
}

DriverPaths simulate_drivers(const TimeGrid& grid, const JumpMeasure& jumps, std::uint64_t seed,
                             std::size_t n_paths) {
    return DriverPaths(grid, jumps, seed, n_paths);
}

double spot_rate_integral(const HjmCurve& curve, double a, double b) {
    if (b < a) return -spot_rate_integral(curve, b, a);
    // Between consecutive knots r(t) is affine, so the midpoint rule is exact.
    std::set<double> cuts{a, b};
    auto add = [&](const std::vector<double>& knots) {
        for (double k : knots)
            if (k > a && k < b) cuts.insert(k);
    };
    add(curve.initial_forward.knots());
    add(curve.alpha.time_knots());
    add(curve.alpha.maturity_knots());
    double total = 0.0;
    for (auto it = cuts.begin(); std::next(it) != cuts.end(); ++it) {
        const double l = *it, r = *std::next(it);
        total += (r - l) * spot_rate(curve, 0.5 * (l + r));
    }
    return total;
}

namespace {

struct MarketNode {
    double rr_integral = 0.0, rn_integral = 0.0;
    BondCoefficients real, nominal;
    RealBondDynamics dyn;
    double r = 0.0, mu_i = 0.0, sigma_i = 0.0, mu_s = 0.0, sigma_s = 0.0;
    std::vector<double> gamma_i, gamma_s;
    std::vector<double> w;
};

double jump_factor(const std::vector<double>& loading, const PathIncrements& inc, std::size_t step) {
    double f = 1.0;
    for (std::size_t j = 0; j < loading.size(); ++j) {
        const auto n = inc.count(step, j);
        if (n) f *= std::pow(1.0 + loading[j], static_cast<double>(n));
    }
    return f;
}

double compensator(const std::vector<double>& loading, const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t j = 0; j < loading.size(); ++j) s += loading[j] * w[j];
    return s;
}

void require_positive(double v, const char* what) {
    if (!(v > 0.0))
        throw NumericalError(std::string("simulate_market: nonpositive ") + what +
                             " (scenario bypassed validation?)");
}

}  // namespace

MarketPaths simulate_market(const MarketScenario& sc, const DriverPaths& drivers) {
    return simulate_market(sc, drivers, 0, drivers.paths());
}

MarketPaths simulate_market(const MarketScenario& sc, const DriverPaths& drivers,
                            std::size_t first_path, std::size_t count) {
    if (first_path + count > drivers.paths() || count == 0)
        throw DomainError("simulate_market: path range outside the driver set");
    const TimeGrid& grid = drivers.grid();
    const std::size_t nodes = grid.nodes();
    const std::size_t atoms = sc.jumps.size();
    const double dt = grid.dt();

    std::vector<MarketNode> table(grid.steps);
    for (std::size_t i = 0; i < grid.steps; ++i) {
        const double t = grid.time(i);
        auto& nd = table[i];
        nd.real = bond_loading_coefficients(sc.real_curve, sc.jumps, t, sc.bond_maturity);
        nd.nominal = bond_loading_coefficients(sc.nominal_curve, sc.jumps, t, sc.bond_maturity);
        nd.dyn = real_bond_dynamics(nd.real, sc.inflation, sc.jumps, t);
        nd.r = nd.real.spot_rate;
        nd.rr_integral = spot_rate_integral(sc.real_curve, t, grid.time(i + 1));
        nd.rn_integral = spot_rate_integral(sc.nominal_curve, t, grid.time(i + 1));
        nd.mu_i = sc.inflation.mu(t);
        nd.sigma_i = sc.inflation.sigma(t);
        nd.mu_s = sc.risky.mu(t);
        nd.sigma_s = sc.risky.sigma(t);
        nd.gamma_i.resize(atoms);
        nd.gamma_s.resize(atoms);
        nd.w.resize(atoms);
        for (std::size_t j = 0; j < atoms; ++j) {
            nd.gamma_i[j] = sc.inflation.gamma[j](t);
            nd.gamma_s[j] = sc.risky.gamma[j](t);
            nd.w[j] = sc.jumps.atoms[j].intensity;
        }
    }

    MarketPaths out;
    out.paths = count;
    out.nodes = nodes;
    const std::size_t total = out.paths * nodes;
    for (auto* v : {&out.I, &out.P_r, &out.P_n, &out.B_r, &out.B_n, &out.S, &out.P_r_star,
                    &out.B_r_star, &out.P_r_star_direct, &out.B_r_star_direct})
        v->assign(total, 0.0);

    const double p_r0 = std::exp(-sc.real_curve.initial_forward.integral(0.0, sc.bond_maturity));
    const double p_n0 = std::exp(-sc.nominal_curve.initial_forward.integral(0.0, sc.bond_maturity));

    parallel_for(out.paths, [&](std::size_t begin, std::size_t end) {
        PathIncrements inc;
        for (std::size_t p = begin; p < end; ++p) {
            drivers.fill(first_path + p, inc);
            double I = sc.inflation.initial_index, Pr = p_r0, Pn = p_n0, Br = 1.0, Bn = 1.0;
            double S = sc.risky.initial_price, Pstar = I * p_r0, Bstar = I;
            auto store = [&](std::size_t i) {
                const auto k = out.index(p, i);
                out.I[k] = I;
                out.P_r[k] = Pr;
                out.P_n[k] = Pn;
                out.B_r[k] = Br;
                out.B_n[k] = Bn;
                out.S[k] = S;
                out.P_r_star[k] = I * Pr;
                out.B_r_star[k] = I * Br;
                out.P_r_star_direct[k] = Pstar;
                out.B_r_star_direct[k] = Bstar;
            };
            store(0);
            for (std::size_t i = 0; i < grid.steps; ++i) {
                const auto& nd = table[i];
                const double dWr = inc.dW(i, kWr), dWn = inc.dW(i, kWn);
                const double dWi = inc.dW(i, kWi), dWs = inc.dW(i, kWs);

                I *= (1.0 + (nd.mu_i - compensator(nd.gamma_i, nd.w)) * dt + nd.sigma_i * dWi) *
                     jump_factor(nd.gamma_i, inc, i);
                Pr *= (1.0 + (nd.real.a - compensator(nd.real.c, nd.w)) * dt + nd.real.b * dWr) *
                      jump_factor(nd.real.c, inc, i);
                Pn *= (1.0 + (nd.nominal.a - compensator(nd.nominal.c, nd.w)) * dt +
                       nd.nominal.b * dWn) *
                      jump_factor(nd.nominal.c, inc, i);
                Pstar *= (1.0 + (nd.dyn.a_tilde - compensator(nd.dyn.c_tilde, nd.w)) * dt +
                          nd.real.b * dWr + nd.sigma_i * dWi) *
                         jump_factor(nd.dyn.c_tilde, inc, i);
                Bstar *= (1.0 + (nd.r + nd.mu_i - compensator(nd.gamma_i, nd.w)) * dt +
                          nd.sigma_i * dWi) *
                         jump_factor(nd.gamma_i, inc, i);
                S *= (1.0 + (nd.mu_s - compensator(nd.gamma_s, nd.w)) * dt + nd.sigma_s * dWs) *
                     jump_factor(nd.gamma_s, inc, i);
                Br *= std::exp(nd.rr_integral);
                Bn *= std::exp(nd.rn_integral);

                require_positive(I, "inflation index");
                require_positive(Pr, "real bond");
                require_positive(Pn, "nominal bond");
                require_positive(Pstar, "real zero-coupon bond");
                require_positive(Bstar, "inflation-linked account");
                require_positive(S, "risky share");
                store(i + 1);
            }
        }
    });
    return out;
}

Controls clamp_to_boxes(const Controls& c, const ControlBoxes& boxes) {
    Controls out;
    for (int i = 0; i < 3; ++i) out.portfolio[i] = boxes.portfolio[i].clamp(c.portfolio[i]);
    out.consumption = boxes.consumption.clamp(c.consumption);
    out.premium = boxes.premium.clamp(c.premium);
    return out;
}

StrategyRule StrategyRule::constant(ControlMode mode, const ControlBoxes& boxes, const Controls& c,
                                    std::string label) {
    StrategyRule s;
    s.mode = mode;
    s.boxes = boxes;
    s.rule = [c](const ControlState&) { return c; };
    s.label = std::move(label);
    return s;
}

double WealthPaths::flagged_fraction() const {
    if (paths == 0) return 0.0;
    std::size_t n = 0;
    for (auto b : bankrupt) n += b ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(paths);
}

WealthPaths run_wealth(const WealthSimulation& sim) {
    if (!sim.model || !sim.strategy || !sim.drivers)
        throw DomainError("run_wealth: model, strategy and drivers are required");
    if (!(sim.x0 > 0.0)) throw DomainError("run_wealth: x0 must be positive");
    const Model& model = *sim.model;
    const StrategyRule& strategy = *sim.strategy;
    const DriverPaths& drivers = *sim.drivers;
    const TimeGrid& grid = drivers.grid();
    const std::size_t nodes = grid.nodes();
    const std::size_t atoms = model.market.jumps.size();
    const double dt = grid.dt();
    const bool fractional = strategy.mode == ControlMode::fractional;
    const bool log_form = fractional && sim.scheme == FractionalScheme::log_form;
    if (sim.scheme == FractionalScheme::log_form && !fractional)
        throw DomainError("log-form wealth requires a fractional strategy");

    const auto table = coefficient_table(model, grid);

    WealthPaths out;
    out.grid = grid;
    out.paths = drivers.paths();
    if (sim.store_paths) out.x.assign(out.paths * nodes, 0.0);
    out.bankrupt.assign(out.paths, 0);
    out.bankrupt_node.assign(out.paths, 0);

    parallel_for(out.paths, [&](std::size_t begin, std::size_t end) {
        PathIncrements inc;
        std::vector<double> upsilon_buffer(atoms, 0.0);
        for (std::size_t p = begin; p < end; ++p) {
            drivers.fill(p, inc);
            double x = sim.x0;
            double log_x = std::log(sim.x0);
            bool bankrupt = false;
            for (std::size_t i = 0; i < nodes; ++i) {
                const LocalCoefficients& lc = table[i];
                if (sim.store_paths) out.x[p * nodes + i] = x;

                ControlState state;
                state.t = grid.time(i);
                state.node = i;
                state.path = p;
                state.x = x;
                state.coeffs = &lc;
                if (sim.companion) {
                    sim.companion->fill(state, upsilon_buffer);
                } else {
                    std::fill(upsilon_buffer.begin(), upsilon_buffer.end(), 0.0);
                    state.upsilon = upsilon_buffer;
                }
                const Controls u = strategy(state);
                if (sim.visitor) {
                    NodeRecord rec;
                    rec.path = p;
                    rec.node = i;
                    rec.state = &state;
                    rec.controls = &u;
                    rec.coeffs = &lc;
                    rec.increments = &inc;
                    rec.bankrupt = bankrupt;
                    sim.visitor(rec);
                }
                if (i + 1 == nodes || bankrupt) continue;

                const Vec3 v = lc.loading(u.portfolio);
                const double diffusion =
                    v[0] * inc.dW(i, kWr) + v[1] * inc.dW(i, kWi) + v[2] * inc.dW(i, kWs);
                double jump_comp = 0.0;
                double jump_sum = 0.0;
                double log_jump = 0.0;
                for (std::size_t j = 0; j < atoms; ++j) {
                    const double g = lc.jump_exposure(u.portfolio, j);
                    jump_comp += lc.weights[j] * g;
                    const auto n = inc.count(i, j);
                    if (n == 0) continue;
                    jump_sum += g * n;
                    if (log_form) {
                        if (!(1.0 + g > 0.0))
                            throw NumericalError("log-form wealth: jump factor 1 + <pi, gamma> <= 0");
                        log_jump += n * std::log1p(g);
                    }
                }
                const double mean = lc.mean_excess(u.portfolio);
                if (log_form) {
                    const double qv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                    log_x += (lc.r + mean - u.consumption - u.premium - 0.5 * qv - jump_comp) * dt +
                             diffusion + log_jump;
                    x = std::exp(log_x);
                } else if (fractional) {
                    x *= 1.0 + (lc.r + mean - u.consumption - u.premium - jump_comp) * dt +
                         diffusion + jump_sum;
                } else {
                    x += (lc.r * x + mean - u.consumption - u.premium - jump_comp) * dt +
                         diffusion + jump_sum;
                }
                const bool negative = fractional && !log_form ? !(x > 0.0) : x < 0.0;
                if (negative && !log_form) {
                    bankrupt = true;
                    out.bankrupt[p] = 1;
                    out.bankrupt_node[p] = static_cast<std::uint32_t>(i + 1);
                }
            }
        }
    });
    return out;
}

WealthPaths simulate_wealth(const Model& model, const StrategyRule& strategy,
                            const DriverPaths& drivers, double x0,
                            const FeedbackSource* companion) {
    WealthSimulation sim;
    sim.model = &model;
    sim.strategy = &strategy;
    sim.drivers = &drivers;
    sim.x0 = x0;
    sim.companion = companion;
    return run_wealth(sim);
}

WealthPaths simulate_wealth_power_logform(const Model& model, const StrategyRule& strategy,
                                          const DriverPaths& drivers, double x0,
                                          const FeedbackSource* companion) {
    if (strategy.mode != ControlMode::fractional)
        throw DomainError("simulate_wealth_power_logform: strategy must be fractional");
    WealthSimulation sim;
    sim.model = &model;
    sim.strategy = &strategy;
    sim.drivers = &drivers;
    sim.x0 = x0;
    sim.companion = companion;
    sim.scheme = FractionalScheme::log_form;
    return run_wealth(sim);
}

std::vector<double> stochastic_exponential(std::span<const MartingaleStep> steps) {
    std::vector<double> out(steps.size() + 1);
    double log_e = 0.0;
    out[0] = 1.0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& s = steps[i];
        log_e += s.drift + s.diffusive - 0.5 * s.quadratic_variation;
        for (double j : s.jumps) {
            if (!(j > -1.0)) throw DomainError("stochastic_exponential: jump <= -1");
            log_e += std::log1p(j);
        }
        out[i + 1] = std::exp(log_e);
    }
    return out;
}

}  // namespace icins
