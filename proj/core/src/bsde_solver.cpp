#include "icins/bsde_solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>

#include "icins/error.hpp"
#include "icins/parallel.hpp"
#include "icins/stats.hpp"

namespace icins {

void PicardSettings::validate() const {
    if (!(damping > 0.0 && damping <= 1.0)) throw DomainError("picard: damping must lie in (0, 1]");
    if (max_iterations < 1) throw DomainError("picard: max_iterations must be >= 1");
    if (!(tolerance > 0.0)) throw DomainError("picard: tolerance must be positive");
}

BsdeSolution BsdeSolution::deterministic(TimeGrid grid, std::size_t atoms, std::vector<double> y) {
    if (y.size() != grid.nodes()) throw DomainError("BsdeSolution: Y needs one value per node");
    BsdeSolution s;
    s.mode_ = Mode::deterministic;
    s.grid_ = grid;
    s.atoms_ = atoms;
    s.y_ = std::move(y);
    s.summary.resize(grid.nodes());
    for (std::size_t i = 0; i < grid.nodes(); ++i) {
        s.summary[i].y_mean = s.y_[i];
        s.summary[i].upsilon_mean.assign(atoms, 0.0);
    }
    return s;
}

BsdeSolution BsdeSolution::per_path(TimeGrid grid, std::size_t atoms, std::vector<RegressionFit> fits) {
    if (fits.size() != grid.nodes()) throw DomainError("BsdeSolution: one fit per node required");
    for (const auto& f : fits)
        if (f.targets() != 4 + atoms) throw DomainError("BsdeSolution: fit must carry Y, Z1..Z3 and Upsilon");
    BsdeSolution s;
    s.mode_ = Mode::per_path;
    s.grid_ = grid;
    s.atoms_ = atoms;
    s.fits_ = std::move(fits);
    s.summary.resize(grid.nodes());
    return s;
}

double BsdeSolution::y(std::size_t node, double x) const {
    if (mode_ == Mode::deterministic) return y_.at(node);
    return fits_.at(node).evaluate(&x, 0);
}

Vec3 BsdeSolution::z(std::size_t node, double x) const {
    if (mode_ == Mode::deterministic) return {0.0, 0.0, 0.0};
    const auto& f = fits_.at(node);
    return {f.evaluate(&x, 1), f.evaluate(&x, 2), f.evaluate(&x, 3)};
}

double BsdeSolution::upsilon(std::size_t node, std::size_t atom, double x) const {
    if (mode_ == Mode::deterministic) return 0.0;
    return fits_.at(node).evaluate(&x, 4 + atom);
}

void BsdeSolution::fill(ControlState& state, std::vector<double>& upsilon_buffer) const {
    upsilon_buffer.resize(atoms_);
    if (mode_ == Mode::deterministic) {
        state.y = y_.at(state.node);
        state.z = {0.0, 0.0, 0.0};
        std::fill(upsilon_buffer.begin(), upsilon_buffer.end(), 0.0);
    } else {
        double out[64];
        std::vector<double> big;
        double* dst = out;
        if (4 + atoms_ > 64) {
            big.resize(4 + atoms_);
            dst = big.data();
        }
        fits_.at(state.node).evaluate_all(&state.x, dst);
        state.y = dst[0];
        state.z = {dst[1], dst[2], dst[3]};
        for (std::size_t j = 0; j < atoms_; ++j) upsilon_buffer[j] = dst[4 + j];
    }
    state.upsilon = upsilon_buffer;
}

std::vector<double> solve_ode_backward(const TimeGrid& grid, const ScalarGenerator& h) {
    const std::size_t n = grid.steps;
    const double dt = grid.dt();
    std::vector<double> y(grid.nodes(), 0.0);
    // In reversed time s = T - t the equation reads dY/ds = h(T - s, Y). Piecewise-constant
    // coefficients are right-continuous, so the first stage takes the left limit at t1: a
    // knot sitting on a node then never leaks the next piece into the step.
    for (std::size_t k = n; k-- > 0;) {
        const double t1 = grid.time(k + 1);
        const double tm = t1 - 0.5 * dt;
        const double t0 = grid.time(k);
        const double y1 = y[k + 1];
        const double k1 = h(std::nextafter(t1, t0), y1);
        const double k2 = h(tm, y1 + 0.5 * dt * k1);
        const double k3 = h(tm, y1 + 0.5 * dt * k2);
        const double k4 = h(t0, y1 + dt * k3);
        y[k] = y1 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(y[k])) throw NumericalError("solve_ode_backward: non-finite solution");
    }
    y[n] = 0.0;
    return y;
}

BsdeSolution solve_ode_power(const Model& model, double kappa, const ControlBoxes& boxes,
                             const TimeGrid& grid) {
    UtilitySpec::power(kappa).validate();
    const std::size_t atoms = model.market.jumps.size();
    const std::vector<double> zero_upsilon(atoms, 0.0);
    bool saturated = false;
    bool clamped = false;
    const auto h = [&](double t, double y) {
        const LocalCoefficients lc = local_coefficients(model, std::min(t, grid.horizon));
        GeneratorInputs in{t, 0.0, y, {0.0, 0.0, 0.0}, zero_upsilon};
        const auto g = generator_power(in, lc, kappa, boxes);
        saturated = saturated || g.controls.saturated;
        clamped = clamped || g.controls.hazard_clamped;
        return g.value;
    };
    auto sol = BsdeSolution::deterministic(grid, atoms, solve_ode_backward(grid, h));
    sol.saturated = saturated;
    sol.hazard_clamped = clamped;
    sol.iterations = 1;
    return sol;
}

namespace {

// Priced Brownian drivers in slot order: Z1 <-> W_r, Z2 <-> W_I, Z3 <-> W_S.
constexpr std::size_t kSlotDriver[3] = {kWr, kWi, kWs};

struct StoredIncrements {
    std::size_t paths = 0, steps = 0, atoms = 0;
    std::vector<double> dw;        // [(p * steps + i) * 3 + slot]
    std::vector<double> counts;    // [(p * steps + i) * atoms + j]

    double dW(std::size_t p, std::size_t i, std::size_t slot) const {
        return dw[(p * steps + i) * 3 + slot];
    }
    double count(std::size_t p, std::size_t i, std::size_t j) const {
        return counts[(p * steps + i) * atoms + j];
    }
};

StoredIncrements store_increments(const DriverPaths& drivers) {
    StoredIncrements s;
    s.paths = drivers.paths();
    s.steps = drivers.grid().steps;
    s.atoms = drivers.atoms();
    s.dw.resize(s.paths * s.steps * 3);
    s.counts.resize(s.paths * s.steps * s.atoms);
    parallel_for(s.paths, [&](std::size_t begin, std::size_t end) {
        PathIncrements inc;
        for (std::size_t p = begin; p < end; ++p) {
            drivers.fill(p, inc);
            for (std::size_t i = 0; i < s.steps; ++i) {
                for (std::size_t k = 0; k < 3; ++k) s.dw[(p * s.steps + i) * 3 + k] = inc.dW(i, kSlotDriver[k]);
                for (std::size_t j = 0; j < s.atoms; ++j)
                    s.counts[(p * s.steps + i) * s.atoms + j] = inc.count(i, j);
            }
        }
    });
    return s;
}

std::size_t nominal_basis_size(int degree) { return static_cast<std::size_t>(degree) + 1; }

}  // namespace

FbsdeResult solve_fbsde(const FbsdeProblem& pb) {
    pb.utility.validate();
    pb.regression.validate();
    pb.picard.validate();
    if (pb.n_paths < 10 * nominal_basis_size(pb.regression.degree))
        throw DomainError("solve_fbsde: need at least 10 paths per basis function");

    const TimeGrid& grid = pb.grid;
    const std::size_t nodes = grid.nodes();
    const std::size_t steps = grid.steps;
    const std::size_t n = pb.n_paths;
    const std::size_t atoms = pb.model.market.jumps.size();
    const std::size_t cols = 4 + atoms;
    const double dt = grid.dt();

    const DriverPaths drivers(grid, pb.model.market.jumps, pb.seed, n);
    const StoredIncrements inc = store_increments(drivers);
    const auto table = coefficient_table(pb.model, grid);
    const StrategyRule strategy = optimal_strategy(pb.utility, pb.boxes);

    std::vector<RegressionFit> fits(nodes, RegressionFit::constant(1, cols, 0.0));
    std::vector<std::optional<Standardizer>> standardizers(nodes);
    BsdeSolution current = BsdeSolution::per_path(grid, atoms, fits);

    std::atomic<bool> saturated{false};
    std::atomic<bool> clamped{false};
    bool degenerate = false;
    std::vector<double> trace;
    bool converged = false;
    WealthPaths wealth;

    const auto h_at = [&](const LocalCoefficients& lc, const GeneratorInputs& in) {
        if (pb.generator_override) return pb.generator_override(lc, in);
        const auto g = generator(pb.utility, in, lc, pb.boxes);
        if (g.controls.saturated) saturated = true;
        if (g.controls.hazard_clamped) clamped = true;
        return g.value;
    };

    Eigen::VectorXd y_next = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    Eigen::VectorXd y_now(static_cast<Eigen::Index>(n));
    Eigen::MatrixXd states(static_cast<Eigen::Index>(n), 1);
    Eigen::MatrixXd loadings(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(3 + atoms));

    int iteration = 0;
    for (; iteration < pb.picard.max_iterations; ++iteration) {
        WealthSimulation sim;
        sim.model = &pb.model;
        sim.strategy = &strategy;
        sim.drivers = &drivers;
        sim.x0 = pb.x0;
        sim.companion = &current;
        sim.scheme = pb.utility.kind == UtilitySpec::Kind::power ? FractionalScheme::log_form
                                                                 : FractionalScheme::euler;
        wealth = run_wealth(sim);

        std::vector<RegressionFit> next(nodes, RegressionFit::constant(1, cols, 0.0));
        double sup_change = 0.0;
        y_next.setZero();
        for (std::size_t i = steps; i-- > 0;) {
            const LocalCoefficients& lc = table[i];
            for (std::size_t p = 0; p < n; ++p) states(static_cast<Eigen::Index>(p), 0) = wealth.at(p, i);
            if (!standardizers[i]) standardizers[i] = Standardizer::fit(states);
            const LeastSquaresProjector proj(states, pb.regression, &*standardizers[i]);
            degenerate = degenerate || proj.degenerate();

            const RegressionFit e_fit = proj.fit(y_next);
            const Eigen::VectorXd e_hat = proj.fitted(e_fit, 0);
            for (std::size_t p = 0; p < n; ++p) {
                const auto ep = static_cast<Eigen::Index>(p);
                const double dm = y_next[ep] - e_hat[ep];
                for (std::size_t k = 0; k < 3; ++k)
                    loadings(ep, static_cast<Eigen::Index>(k)) = dm * inc.dW(p, i, k) / dt;
                for (std::size_t j = 0; j < atoms; ++j) {
                    const double w = lc.weights[j];
                    loadings(ep, static_cast<Eigen::Index>(3 + j)) =
                        w > 0.0 ? dm * (inc.count(p, i, j) - w * dt) / (w * dt) : 0.0;
                }
            }
            const RegressionFit l_fit = proj.fit(loadings);
            Eigen::MatrixXd l_hat(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(3 + atoms));
            for (std::size_t c = 0; c < 3 + atoms; ++c) l_hat.col(static_cast<Eigen::Index>(c)) = proj.fitted(l_fit, c);

            parallel_for(n, [&](std::size_t begin, std::size_t end) {
                std::vector<double> ups(atoms);
                for (std::size_t p = begin; p < end; ++p) {
                    const auto ep = static_cast<Eigen::Index>(p);
                    for (std::size_t j = 0; j < atoms; ++j) ups[j] = l_hat(ep, static_cast<Eigen::Index>(3 + j));
                    GeneratorInputs in{grid.time(i), wealth.at(p, i), e_hat[ep],
                                       {l_hat(ep, 0), l_hat(ep, 1), l_hat(ep, 2)}, ups};
                    y_now[ep] = e_hat[ep] + dt * h_at(lc, in);
                }
            });
            if (!y_now.allFinite()) throw NumericalError("solve_fbsde: non-finite Y in the backward pass");

            const RegressionFit y_fit = proj.fit(y_now);
            Eigen::MatrixXd coef(static_cast<Eigen::Index>(y_fit.basis_size()), static_cast<Eigen::Index>(cols));
            coef.col(0) = y_fit.coefficients().col(0);
            coef.rightCols(static_cast<Eigen::Index>(3 + atoms)) = l_fit.coefficients();

            // Damped update, linear in the coefficients of the shared basis.
            const bool has_previous = iteration > 0;
            if (has_previous) {
                const Eigen::MatrixXd& old = fits[i].coefficients();
                coef = pb.picard.damping * coef + (1.0 - pb.picard.damping) * old;
            }
            next[i] = RegressionFit(*standardizers[i], pb.regression.degree, coef, proj.degenerate());

            const Eigen::VectorXd y_new = proj.fitted(next[i], 0);
            Eigen::VectorXd delta = y_new;
            if (has_previous) delta -= proj.fitted(fits[i], 0);
            sup_change = std::max(sup_change, delta.cwiseAbs().maxCoeff());
            y_next = y_now;
        }
        fits = std::move(next);
        current = BsdeSolution::per_path(grid, atoms, fits);
        trace.push_back(sup_change);
        if (sup_change < pb.picard.tolerance) {
            converged = true;
            ++iteration;
            break;
        }
    }

    // Cross-path summaries on the last forward paths.
    std::vector<NodeSummary> summary(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
        std::vector<double> ys(n), zs[3];
        std::vector<std::vector<double>> us(atoms, std::vector<double>(n));
        for (auto& v : zs) v.resize(n);
        for (std::size_t p = 0; p < n; ++p) {
            const double x = wealth.at(p, i);
            ys[p] = current.y(i, x);
            const Vec3 z = current.z(i, x);
            for (int k = 0; k < 3; ++k) zs[k][p] = z[static_cast<std::size_t>(k)];
            for (std::size_t j = 0; j < atoms; ++j) us[j][p] = current.upsilon(i, j, x);
        }
        const auto ym = mean_and_se(ys);
        summary[i].y_mean = ym.mean;
        summary[i].y_sd = ym.sd;
        for (int k = 0; k < 3; ++k) summary[i].z_mean[static_cast<std::size_t>(k)] = mean_and_se(zs[k]).mean;
        summary[i].upsilon_mean.resize(atoms);
        for (std::size_t j = 0; j < atoms; ++j) summary[i].upsilon_mean[j] = mean_and_se(us[j]).mean;
    }

    FbsdeResult result{std::move(current), std::move(wealth)};
    auto& sol = result.solution;
    sol.summary = std::move(summary);
    sol.picard_trace = std::move(trace);
    sol.iterations = iteration;
    sol.converged = converged;
    sol.saturated = saturated;
    sol.hazard_clamped = clamped;
    sol.regression_degenerate = degenerate;
    return result;
}

FbsdeResult solve_fbsde_exponential(const Model& model, double delta, const ControlBoxes& boxes,
                                    const TimeGrid& grid, double x0, std::size_t n_paths,
                                    const RegressionSpec& regression, const PicardSettings& picard,
                                    std::uint64_t seed) {
    FbsdeProblem pb;
    pb.model = model;
    pb.utility = UtilitySpec::exponential(delta);
    pb.boxes = boxes;
    pb.grid = grid;
    pb.x0 = x0;
    pb.n_paths = n_paths;
    pb.seed = seed;
    pb.regression = regression;
    pb.picard = picard;
    return solve_fbsde(pb);
}

FbsdeResult solve_fbsde_power(const Model& model, double kappa, const ControlBoxes& boxes,
                              const TimeGrid& grid, double x0, std::size_t n_paths,
                              const RegressionSpec& regression, const PicardSettings& picard,
                              std::uint64_t seed) {
    FbsdeProblem pb;
    pb.model = model;
    pb.utility = UtilitySpec::power(kappa);
    pb.boxes = boxes;
    pb.grid = grid;
    pb.x0 = x0;
    pb.n_paths = n_paths;
    pb.seed = seed;
    pb.regression = regression;
    pb.picard = picard;
    return solve_fbsde(pb);
}

}  // namespace icins
