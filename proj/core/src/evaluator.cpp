#include "icins/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "icins/error.hpp"

namespace icins {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_power(const UtilitySpec& u) { return u.kind == UtilitySpec::Kind::power; }

// Running utility rate (without the discount factor) and terminal utility.
struct Utility {
    UtilitySpec spec;

    double running(double x, const Controls& u, const LocalCoefficients& lc) const {
        const double lam = lc.hazard, eta = lc.premium_ratio;
        if (is_power(spec)) {
            const double k = spec.kappa;
            double r = std::pow(u.consumption, k);
            if (lam != 0.0) r += lam * std::pow(1.0 + u.premium / eta, k);
            return r * std::pow(x, k) / k;
        }
        const double d = spec.delta;
        double r = -std::exp(-d * u.consumption);
        if (lam != 0.0) r -= lam * std::exp(-d * (x + u.premium / eta));
        return r;
    }

    // Value-function part of R at wealth x and backward value y.
    double state_part(double x, double y) const {
        if (is_power(spec)) return std::pow(x, spec.kappa) / spec.kappa * std::exp(y);
        return -std::exp(-spec.delta * (x - y));
    }
};

struct FunctionalRun {
    std::vector<double> value;         // J per path
    std::vector<std::uint8_t> flagged;
    std::vector<double> r;             // paths x nodes, only when requested
    std::size_t nodes = 0;
};

FunctionalRun run_functional(const Model& model, const UtilitySpec& utility,
                             const StrategyRule& strategy, double x0, const DriverPaths& drivers,
                             const FeedbackSource* companion, bool record_r) {
    utility.validate();
    if (is_power(utility) && strategy.mode != ControlMode::fractional)
        throw DomainError("power utility needs a fractional strategy");
    if (!is_power(utility) && strategy.mode != ControlMode::absolute)
        throw DomainError("exponential utility needs an absolute strategy");

    const TimeGrid& grid = drivers.grid();
    const std::size_t nodes = grid.nodes();
    const std::size_t n = drivers.paths();
    const double dt = grid.dt();
    const auto disc = discount_table(model, grid);
    const Utility util{utility};

    FunctionalRun out;
    out.nodes = nodes;
    out.value.assign(n, 0.0);
    if (record_r) out.r.assign(n * nodes, 0.0);
    std::vector<double> integral(n, 0.0), previous(n, 0.0);

    WealthSimulation sim;
    sim.model = &model;
    sim.strategy = &strategy;
    sim.drivers = &drivers;
    sim.x0 = x0;
    sim.companion = companion;
    sim.scheme = is_power(utility) ? FractionalScheme::log_form : FractionalScheme::euler;
    sim.store_paths = false;
    sim.visitor = [&](const NodeRecord& rec) {
        const std::size_t p = rec.path, i = rec.node;
        const double x = rec.state->x;
        const double f = disc[i] * util.running(x, *rec.controls, *rec.coeffs);
        if (i > 0) integral[p] += 0.5 * dt * (previous[p] + f);
        previous[p] = f;
        if (record_r) out.r[p * nodes + i] = disc[i] * util.state_part(x, rec.state->y) + integral[p];
        if (i + 1 == nodes) out.value[p] = disc[i] * util.state_part(x, 0.0) + integral[p];
    };
    const WealthPaths w = run_wealth(sim);
    out.flagged = w.bankrupt;
    return out;
}

ValueEstimate summarize(const FunctionalRun& run) {
    ValueEstimate est;
    est.samples = run.value;
    std::vector<double> valid;
    valid.reserve(run.value.size());
    std::size_t flagged = 0;
    for (std::size_t p = 0; p < run.value.size(); ++p) {
        if (run.flagged[p]) {
            est.samples[p] = kNaN;
            ++flagged;
        } else {
            valid.push_back(run.value[p]);
        }
    }
    const auto m = mean_and_se(valid);
    est.mean = m.mean;
    est.standard_error = m.standard_error;
    est.n_paths = valid.size();
    est.flagged_fraction = run.value.empty() ? 0.0 : static_cast<double>(flagged) / run.value.size();
    return est;
}

}  // namespace

std::vector<double> discount_table(const Model& model, const TimeGrid& grid) {
    std::vector<double> d(grid.nodes());
    for (std::size_t i = 0; i < grid.nodes(); ++i)
        d[i] = discount_survival_factor(model.market.discount, model.mortality, 0.0, grid.time(i));
    return d;
}

ValueEstimate estimate_value_exponential(const Model& model, const StrategyRule& strategy,
                                         double delta, double x0, const DriverPaths& drivers,
                                         const FeedbackSource* companion) {
    return summarize(run_functional(model, UtilitySpec::exponential(delta), strategy, x0, drivers,
                                    companion, false));
}

ValueEstimate estimate_value_power(const Model& model, const StrategyRule& strategy, double kappa,
                                   double x0, const DriverPaths& drivers,
                                   const FeedbackSource* companion) {
    if (!(x0 > 0.0)) throw DomainError("estimate_value_power: x0 must be positive");
    return summarize(
        run_functional(model, UtilitySpec::power(kappa), strategy, x0, drivers, companion, false));
}

ValueEstimate estimate_value(const Model& model, const UtilitySpec& utility,
                             const StrategyRule& strategy, double x0, const DriverPaths& drivers,
                             const FeedbackSource* companion) {
    return summarize(run_functional(model, utility, strategy, x0, drivers, companion, false));
}

MeanSe paired_difference(const ValueEstimate& a, const ValueEstimate& b) {
    if (a.samples.size() != b.samples.size())
        throw DomainError("paired_difference: estimates come from different path sets");
    std::vector<double> d;
    d.reserve(a.samples.size());
    for (std::size_t p = 0; p < a.samples.size(); ++p)
        if (!std::isnan(a.samples[p]) && !std::isnan(b.samples[p])) d.push_back(a.samples[p] - b.samples[p]);
    return mean_and_se(d);
}

double drift_value(const UtilitySpec& utility, const LocalCoefficients& lc,
                   const GeneratorInputs& in, const Controls& u, double generator_value,
                   double discount_factor) {
    if (is_power(utility)) {
        const double k = utility.kappa;
        const double f = power_drift_objective(in, lc, k, u);
        return discount_factor * std::pow(in.x, k) * std::exp(in.y) * (f - generator_value / k);
    }
    const double d = utility.delta;
    const double lam = lambda_exponential(in, lc, d, u);
    return d * discount_factor * std::exp(-d * (in.x - in.y)) * (generator_value - lam);
}

namespace {

DriftReport drift_core(const Model& model, const UtilitySpec& utility, const ControlBoxes& boxes,
                       const BsdeSolution& solution, std::span<const DriftState> samples,
                       const StrategyRule* strategy, std::span<const Controls> controls) {
    utility.validate();
    const TimeGrid& grid = solution.grid();
    const auto disc = discount_table(model, grid);
    const auto table = coefficient_table(model, grid);
    DriftReport rep;
    rep.values.reserve(samples.size());
    rep.optimum_values.reserve(samples.size());
    std::vector<double> ups;
    double sq = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto& s = samples[k];
        if (s.node >= grid.nodes()) throw DomainError("drift_residual: node outside the grid");
        const LocalCoefficients& lc = table[s.node];
        ControlState st;
        st.t = grid.time(s.node);
        st.node = s.node;
        st.x = s.x;
        st.coeffs = &lc;
        solution.fill(st, ups);
        const GeneratorInputs in{st.t, st.x, st.y, st.z, st.upsilon};
        const auto g = generator(utility, in, lc, boxes);
        const double at_opt = drift_value(utility, lc, in, g.controls.controls(), g.value, disc[s.node]);
        Controls u = g.controls.controls();
        if (!controls.empty()) u = controls[k];
        else if (strategy) u = (*strategy)(st);
        const double a = drift_value(utility, lc, in, u, g.value, disc[s.node]);
        rep.values.push_back(a);
        rep.optimum_values.push_back(at_opt);
        rep.max_positive_excursion = std::max(rep.max_positive_excursion, a);
        sq += at_opt * at_opt;
    }
    rep.rms_residual_at_optimum = samples.empty() ? 0.0 : std::sqrt(sq / samples.size());
    return rep;
}

}  // namespace

DriftReport drift_residual(const Model& model, const UtilitySpec& utility, const ControlBoxes& boxes,
                           const BsdeSolution& solution, const StrategyRule* strategy,
                           std::span<const DriftState> samples) {
    return drift_core(model, utility, boxes, solution, samples, strategy, {});
}

DriftReport drift_residual_controls(const Model& model, const UtilitySpec& utility,
                                    const ControlBoxes& boxes, const BsdeSolution& solution,
                                    std::span<const DriftState> samples,
                                    std::span<const Controls> controls) {
    if (controls.size() != samples.size())
        throw DomainError("drift_residual_controls: one control per sample required");
    return drift_core(model, utility, boxes, solution, samples, nullptr, controls);
}

double value_formula(const UtilitySpec& utility, const BsdeSolution& solution, double x0) {
    const double y0 = solution.y(0, x0);
    if (is_power(utility)) return std::pow(x0, utility.kappa) / utility.kappa * std::exp(y0);
    return -std::exp(-utility.delta * (x0 - y0));
}

VerificationReport supermartingale_check(const Model& model, const UtilitySpec& utility,
                                         const BsdeSolution& solution,
                                         std::span<const StrategyRule> strategies, double x0,
                                         const DriverPaths& drivers) {
    VerificationReport rep;
    rep.v_formula = value_formula(utility, solution, x0);
    for (const auto& strategy : strategies) {
        const auto run = run_functional(model, utility, strategy, x0, drivers, &solution, true);
        const std::size_t nodes = run.nodes;
        StrategyGap gap;
        gap.label = strategy.label;
        gap.value = summarize(run);

        std::vector<std::size_t> valid;
        for (std::size_t p = 0; p < run.value.size(); ++p)
            if (!run.flagged[p]) valid.push_back(p);
        std::vector<double> buf(valid.size());
        for (std::size_t k = 0; k < valid.size(); ++k) {
            const std::size_t p = valid[k];
            buf[k] = run.r[p * nodes + nodes - 1] - run.r[p * nodes];
        }
        const auto g = mean_and_se(buf);
        gap.gap = g.mean;
        gap.standard_error = g.standard_error;
        for (std::size_t i = 0; i + 1 < nodes; ++i) {
            for (std::size_t k = 0; k < valid.size(); ++k) {
                const std::size_t p = valid[k];
                buf[k] = run.r[p * nodes + i + 1] - run.r[p * nodes];
            }
            const auto m = mean_and_se(buf);
            gap.node_increment_mean.push_back(m.mean);
            gap.node_increment_se.push_back(m.standard_error);
            if (m.standard_error > 0.0)
                gap.worst_increment_z = std::max(gap.worst_increment_z, std::abs(m.mean) / m.standard_error);
        }
        rep.strategies.push_back(std::move(gap));
    }
    if (!rep.strategies.empty()) {
        const auto& first = rep.strategies.front().value;
        const double diff = std::abs(rep.v_formula - first.mean);
        rep.value_consistency_se = first.standard_error > 0.0
                                       ? diff / first.standard_error
                                       : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        const auto loads = collect_loadings(model, utility, strategies.front(), x0, drivers, &solution);
        const auto bmo = bmo_diagnostics(loads);
        rep.bmo_constant_estimate = bmo.bmo_constant_estimate;
        rep.positivity_violations = bmo.positivity_violations;
    }
    return rep;
}

ConsistencyEntry value_consistency(const Model& model, const UtilitySpec& utility,
                                   const ControlBoxes& boxes, const BsdeSolution& solution,
                                   double x0, const DriverPaths& drivers) {
    ConsistencyEntry e;
    e.v_formula = value_formula(utility, solution, x0);
    const StrategyRule opt = optimal_strategy(utility, boxes);
    e.estimate = estimate_value(model, utility, opt, x0, drivers, &solution);
    const double diff = std::abs(e.v_formula - e.estimate.mean);
    e.discrepancy_se = e.estimate.standard_error > 0.0
                           ? diff / e.estimate.standard_error
                           : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    return e;
}

LoadingPaths collect_loadings(const Model& model, const UtilitySpec& utility,
                              const StrategyRule& strategy, double x0, const DriverPaths& drivers,
                              const FeedbackSource* companion) {
    utility.validate();
    const TimeGrid& grid = drivers.grid();
    const std::size_t n = drivers.paths();
    const std::size_t steps = grid.steps;
    LoadingPaths out;
    out.paths = n;
    out.steps = steps;
    out.dt = grid.dt();
    out.rate.assign(n * steps, 0.0);
    std::vector<std::vector<double>> jumps(n);
    const bool power = is_power(utility);

    WealthSimulation sim;
    sim.model = &model;
    sim.strategy = &strategy;
    sim.drivers = &drivers;
    sim.x0 = x0;
    sim.companion = companion;
    sim.scheme = power ? FractionalScheme::log_form : FractionalScheme::euler;
    sim.store_paths = false;
    sim.visitor = [&](const NodeRecord& rec) {
        if (rec.node == steps || rec.bankrupt) return;
        const auto& lc = *rec.coeffs;
        const Vec3& theta = rec.controls->portfolio;
        const Vec3 v = lc.loading(theta);
        const double scale = power ? utility.kappa : -utility.delta;
        double rate = scale * scale * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        for (std::size_t j = 0; j < lc.atoms(); ++j) {
            const double g = lc.jump_exposure(theta, j);
            const double size =
                power ? (1.0 + g > 0.0 ? std::pow(1.0 + g, utility.kappa) - 1.0 : -1.0)
                      : std::exp(-utility.delta * g) - 1.0;
            rate += lc.weights[j] * size * size;
            const auto c = rec.increments->count(rec.node, j);
            for (std::uint32_t k = 0; k < c; ++k) jumps[rec.path].push_back(size);
        }
        out.rate[rec.path * steps + rec.node] = rate;
    };
    run_wealth(sim);
    for (const auto& j : jumps) out.jump_sizes.insert(out.jump_sizes.end(), j.begin(), j.end());
    return out;
}

BmoDiagnostics bmo_diagnostics(const LoadingPaths& loadings) {
    BmoDiagnostics d;
    for (std::size_t p = 0; p < loadings.paths; ++p) {
        double remaining = 0.0;
        for (std::size_t i = loadings.steps; i-- > 0;) {
            remaining += loadings.rate[p * loadings.steps + i] * loadings.dt;
            d.bmo_constant_estimate = std::max(d.bmo_constant_estimate, remaining);
        }
    }
    for (double j : loadings.jump_sizes)
        if (!(j > -1.0)) ++d.positivity_violations;
    return d;
}

namespace {

struct Range {
    double lo, hi;
    double abs_max() const { return std::max(std::abs(lo), std::abs(hi)); }
};

Range range_of(const Interval& a) { return {a.lo, a.hi}; }
Range add(Range a, Range b) { return {a.lo + b.lo, a.hi + b.hi}; }
Range times(Range a, double c) { return c >= 0.0 ? Range{a.lo * c, a.hi * c} : Range{a.hi * c, a.lo * c}; }

// Bound of the K or Q integrand at one node, excluding the r X part of K.
double integrand_bound(const UtilitySpec& utility, const LocalCoefficients& lc,
                       const ControlBoxes& boxes) {
    const Range t1 = range_of(boxes.portfolio[0]);
    const Range t2 = range_of(boxes.portfolio[1]);
    const Range t3 = range_of(boxes.portfolio[2]);
    const Range u[3] = {t1, add(t1, t2), t3};
    double mean = 0.0, qv = 0.0;
    for (int i = 0; i < 3; ++i) {
        mean += u[i].abs_max() * std::abs(lc.net_excess[static_cast<std::size_t>(i)]);
        const double v = u[i].abs_max() * std::abs(lc.scale[static_cast<std::size_t>(i)]);
        qv += v * v;
    }
    const double c = range_of(boxes.consumption).abs_max();
    const double p = range_of(boxes.premium).abs_max();
    double jump = 0.0;
    for (std::size_t j = 0; j < lc.atoms(); ++j) {
        const Vec3& gh = lc.gamma_hat[j];
        const Range g = add(add(times(t1, gh[0]), times(t2, gh[1])), times(t3, gh[2]));
        double worst = 0.0;
        for (double e : {g.lo, g.hi}) {
            double f;
            if (is_power(utility)) {
                const double k = utility.kappa;
                f = 1.0 + e > 0.0 ? std::abs(std::pow(1.0 + e, k) - 1.0 - k * e)
                                  : std::numeric_limits<double>::infinity();
            } else {
                const double d = utility.delta;
                f = std::exp(-d * e) - 1.0 + d * e;
            }
            worst = std::max(worst, f);
        }
        jump += lc.weights[j] * worst;
    }
    if (is_power(utility)) {
        const double k = utility.kappa;
        return std::abs(k) * (std::abs(lc.r) + mean + c + p) + 0.5 * std::abs(k * (k - 1.0)) * qv + jump;
    }
    const double d = utility.delta;
    return d * (mean + c + p) + 0.5 * d * d * qv + jump;
}

}  // namespace

ExponentCheck exponent_bound_check(const Model& model, const UtilitySpec& utility,
                                   const StrategyRule& strategy, double x0,
                                   const DriverPaths& drivers, const FeedbackSource* companion) {
    utility.validate();
    const TimeGrid& grid = drivers.grid();
    const std::size_t n = drivers.paths();
    const std::size_t steps = grid.steps;
    const double dt = grid.dt();
    const bool power = is_power(utility);
    const auto table = coefficient_table(model, grid);
    std::vector<double> node_bound(steps);
    for (std::size_t i = 0; i < steps; ++i) node_bound[i] = integrand_bound(utility, table[i], strategy.boxes);

    std::vector<double> k_acc(n, 0.0), b_acc(n, 0.0), sup_x(n, 0.0), max_abs(n, 0.0), max_ratio(n, 0.0);
    std::vector<std::size_t> violations(n, 0);

    WealthSimulation sim;
    sim.model = &model;
    sim.strategy = &strategy;
    sim.drivers = &drivers;
    sim.x0 = x0;
    sim.companion = companion;
    sim.scheme = power ? FractionalScheme::log_form : FractionalScheme::euler;
    sim.store_paths = false;
    sim.visitor = [&](const NodeRecord& rec) {
        const std::size_t p = rec.path, i = rec.node;
        if (rec.bankrupt) return;
        const double k = k_acc[p], b = b_acc[p];
        max_abs[p] = std::max(max_abs[p], std::abs(k));
        if (b > 0.0) max_ratio[p] = std::max(max_ratio[p], std::abs(k) / b);
        if (std::abs(k) > b * (1.0 + 1e-12) + 1e-14) ++violations[p];
        if (i == steps) return;

        const auto& lc = *rec.coeffs;
        const Controls& u = *rec.controls;
        const Vec3 v = lc.loading(u.portfolio);
        const double qv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        const double mean = lc.mean_excess(u.portfolio);
        double integrand = 0.0;
        if (power) {
            const double kap = utility.kappa;
            integrand = kap * (lc.r + mean - u.consumption - u.premium) + 0.5 * kap * (kap - 1.0) * qv;
            for (std::size_t j = 0; j < lc.atoms(); ++j) {
                const double g = lc.jump_exposure(u.portfolio, j);
                integrand += lc.weights[j] * (std::pow(1.0 + g, kap) - 1.0 - kap * g);
            }
        } else {
            const double d = utility.delta;
            const double x = rec.state->x;
            sup_x[p] = std::max(sup_x[p], std::abs(x));
            integrand = -d * (lc.r * x + mean - u.consumption - u.premium) + 0.5 * d * d * qv;
            for (std::size_t j = 0; j < lc.atoms(); ++j) {
                const double g = lc.jump_exposure(u.portfolio, j);
                integrand += lc.weights[j] * (std::exp(-d * g) - 1.0 + d * g);
            }
        }
        k_acc[p] += integrand * dt;
        double bound = node_bound[i];
        if (!power) bound += utility.delta * std::abs(lc.r) * sup_x[p];
        b_acc[p] += bound * dt;
    };
    run_wealth(sim);

    ExponentCheck out;
    for (std::size_t p = 0; p < n; ++p) {
        out.max_abs = std::max(out.max_abs, max_abs[p]);
        out.max_ratio = std::max(out.max_ratio, max_ratio[p]);
        out.violations += violations[p];
    }
    return out;
}

}  // namespace icins
