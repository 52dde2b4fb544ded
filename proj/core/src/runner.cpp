#include "icins/runner.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "icins/csv.hpp"
#include "icins/error.hpp"
#include "icins/evaluator.hpp"

namespace icins {

namespace {

using std::to_string;
const auto& fmt = format_number;

// Mean and spread accumulated in a fixed order (Chan et al. merge of blocks).
struct Moments {
    double n = 0.0, mean = 0.0, m2 = 0.0;
    void add_block(std::span<const double> v) {
        if (v.empty()) return;
        const auto bm = mean_and_se(v);
        const double bn = static_cast<double>(v.size());
        const double bm2 = bm.sd * bm.sd * (bn - 1.0);
        const double delta = bm.mean - mean;
        const double total = n + bn;
        mean += delta * bn / total;
        m2 += bm2 + delta * delta * n * bn / total;
        n = total;
    }
    double sd() const { return n > 1.0 ? std::sqrt(m2 / (n - 1.0)) : 0.0; }
};

struct Solved {
    BsdeSolution solution;
    bool converged = true;
};

Solved solve_for(const ScenarioConfig& c) {
    const TimeGrid grid = c.grid();
    if (c.utility.kind == UtilitySpec::Kind::power) {
        return {solve_ode_power(c.model, c.utility.kappa, c.boxes, grid), true};
    }
    auto r = solve_fbsde_exponential(c.model, c.utility.delta, c.boxes, grid, c.x0, c.solver.paths,
                                     c.solver.regression, c.solver.picard, c.solver.seed);
    const bool ok = r.solution.converged;
    return {std::move(r.solution), ok};
}

bool is_power(const ScenarioConfig& c) { return c.utility.kind == UtilitySpec::Kind::power; }

class Outputs {
public:
    Outputs(std::string dir, Manifest m) : dir_(std::move(dir)), manifest_(std::move(m)) {
        std::filesystem::create_directories(dir_);
    }
    std::string path(const std::string& name) {
        const auto p = (std::filesystem::path(dir_) / name).string();
        files_.push_back(p);
        return p;
    }
    const Manifest& manifest() const { return manifest_; }
    std::vector<std::string>& files() { return files_; }

private:
    std::string dir_;
    Manifest manifest_;
    std::vector<std::string> files_;
};

void write_manifest(Outputs& o, const ScenarioConfig& c) {
    const auto p = o.path("run_manifest.ini");
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open '" + p + "' for writing");
    f << "# Re-run with: icins " << o.manifest().command << " --config run_manifest.ini\n";
    f << "[run]\ncommand = " << o.manifest().command << "\nversion = " << o.manifest().version
      << "\nconfig_hash = " << o.manifest().config_hash << "\n\n";
    f << serialize_config(c);
    f.flush();
    if (!f) throw Error("write to '" + p + "' failed");
}

WealthPaths optimal_wealth(const ScenarioConfig& c, const BsdeSolution& sol, const DriverPaths& drivers,
                           const StrategyRule& rule) {
    WealthSimulation sim;
    sim.model = &c.model;
    sim.strategy = &rule;
    sim.drivers = &drivers;
    sim.x0 = c.x0;
    sim.companion = &sol;
    sim.scheme = is_power(c) ? FractionalScheme::log_form : FractionalScheme::euler;
    return run_wealth(sim);
}

void write_solution(Outputs& o, const ScenarioConfig& c, const BsdeSolution& sol) {
    const std::size_t atoms = c.model.market.jumps.size();
    std::vector<std::string> cols{"node", "t", "y_mean", "y_sd", "z1_mean", "z2_mean", "z3_mean"};
    for (std::size_t j = 0; j < atoms; ++j) cols.push_back("upsilon" + to_string(j) + "_mean");
    CsvWriter w(o.path("solution.csv"), o.manifest(), cols);
    for (std::size_t i = 0; i < sol.nodes(); ++i) {
        const auto& s = sol.summary[i];
        std::vector<std::string> row{to_string(i), fmt(sol.grid().time(i)), fmt(s.y_mean), fmt(s.y_sd),
                                     fmt(s.z_mean[0]), fmt(s.z_mean[1]), fmt(s.z_mean[2])};
        for (std::size_t j = 0; j < atoms; ++j) row.push_back(fmt(j < s.upsilon_mean.size() ? s.upsilon_mean[j] : 0.0));
        w.row(row);
    }
    w.close();
    if (sol.mode() == BsdeSolution::Mode::per_path) {
        CsvWriter t(o.path("picard_trace.csv"), o.manifest(), {"iteration", "sup_delta_y"});
        for (std::size_t k = 0; k < sol.picard_trace.size(); ++k) t.row({to_string(k + 1), fmt(sol.picard_trace[k])});
        t.close();
    }
}

void simulate_command(Outputs& o, const ScenarioConfig& c, const BsdeSolution& sol, std::ostream& out) {
    const TimeGrid grid = c.grid();
    const std::size_t nodes = grid.nodes();
    const DriverPaths drivers(grid, c.model.market.jumps, c.solver.seed, c.solver.paths);

    const char* names[] = {"I", "P_r", "P_n", "B_r", "B_n", "S", "P_r_star", "B_r_star"};
    constexpr std::size_t kSeries = 8;
    std::vector<Moments> mom(nodes * kSeries);
    const std::size_t block = 4096;
    const std::size_t dump = std::min(c.solver.dump_paths, c.solver.paths);
    std::vector<double> dump_values(dump * nodes * 4, 0.0);
    std::vector<double> buf;
    for (std::size_t first = 0; first < drivers.paths(); first += block) {
        const std::size_t count = std::min(block, drivers.paths() - first);
        const MarketPaths mp = simulate_market(c.model.market, drivers, first, count);
        const std::vector<double>* series[kSeries] = {&mp.I, &mp.P_r, &mp.P_n, &mp.B_r,
                                                      &mp.B_n, &mp.S, &mp.P_r_star, &mp.B_r_star};
        buf.resize(count);
        for (std::size_t i = 0; i < nodes; ++i)
            for (std::size_t k = 0; k < kSeries; ++k) {
                for (std::size_t p = 0; p < count; ++p) buf[p] = (*series[k])[mp.index(p, i)];
                mom[i * kSeries + k].add_block(buf);
            }
        for (std::size_t p = first; p < std::min(dump, first + count); ++p)
            for (std::size_t i = 0; i < nodes; ++i) {
                const auto k = mp.index(p - first, i);
                double* d = &dump_values[(p * nodes + i) * 4];
                d[0] = mp.I[k];
                d[1] = mp.S[k];
                d[2] = mp.P_r_star[k];
                d[3] = mp.B_r_star[k];
            }
    }
    {
        std::vector<std::string> cols{"node", "t"};
        for (const char* n : names) {
            cols.push_back(std::string(n) + "_mean");
            cols.push_back(std::string(n) + "_sd");
        }
        CsvWriter w(o.path("market_summary.csv"), o.manifest(), cols);
        for (std::size_t i = 0; i < nodes; ++i) {
            std::vector<std::string> row{to_string(i), fmt(grid.time(i))};
            for (std::size_t k = 0; k < kSeries; ++k) {
                row.push_back(fmt(mom[i * kSeries + k].mean));
                row.push_back(fmt(mom[i * kSeries + k].sd()));
            }
            w.row(row);
        }
        w.close();
    }

    const StrategyRule rule = optimal_strategy(c.utility, c.boxes);
    const WealthPaths wp = optimal_wealth(c, sol, drivers, rule);
    {
        CsvWriter w(o.path("wealth_summary.csv"), o.manifest(), {"node", "t", "x_mean", "x_sd", "flagged_fraction"});
        std::vector<double> xs;
        for (std::size_t i = 0; i < nodes; ++i) {
            Moments m;
            for (std::size_t first = 0; first < wp.paths; first += block) {
                xs.clear();
                for (std::size_t p = first; p < std::min(wp.paths, first + block); ++p)
                    if (!wp.bankrupt[p]) xs.push_back(wp.at(p, i));
                m.add_block(xs);
            }
            w.row({to_string(i), fmt(grid.time(i)), fmt(m.mean), fmt(m.sd()), fmt(wp.flagged_fraction())});
        }
        w.close();
    }
    {
        CsvWriter w(o.path("paths.csv"), o.manifest(), {"path", "node", "t", "I", "S", "P_r_star", "B_r_star", "X"});
        for (std::size_t p = 0; p < dump; ++p)
            for (std::size_t i = 0; i < nodes; ++i) {
                const double* d = &dump_values[(p * nodes + i) * 4];
                w.row({to_string(p), to_string(i), fmt(grid.time(i)), fmt(d[0]), fmt(d[1]), fmt(d[2]), fmt(d[3]),
                       fmt(wp.at(p, i))});
            }
        w.close();
    }
    out << "simulated " << c.solver.paths << " paths on " << grid.steps << " steps; flagged fraction "
        << fmt(wp.flagged_fraction()) << "\n";
}

void value_command(Outputs& o, const ScenarioConfig& c, const BsdeSolution& sol, std::ostream& out) {
    const DriverPaths drivers(c.grid(), c.model.market.jumps, c.solver.seed, c.solver.paths);
    const auto e = value_consistency(c.model, c.utility, c.boxes, sol, c.x0, drivers);
    CsvWriter w(o.path("value.csv"), o.manifest(),
                {"utility", "x0", "v_formula", "mean", "standard_error", "n_paths", "flagged_fraction", "discrepancy_se"});
    w.row({is_power(c) ? "power" : "exponential", fmt(c.x0), fmt(e.v_formula), fmt(e.estimate.mean),
           fmt(e.estimate.standard_error), to_string(e.estimate.n_paths), fmt(e.estimate.flagged_fraction),
           fmt(e.discrepancy_se)});
    w.close();
    out << "V(0, x0) = " << fmt(e.v_formula) << "\nJ (Monte Carlo) = " << fmt(e.estimate.mean) << " +- "
        << fmt(e.estimate.standard_error) << "\n";
}

Controls random_controls(std::mt19937_64& rng, const ControlBoxes& b) {
    const auto draw = [&](const Interval& i) { return std::uniform_real_distribution<double>(i.lo, i.hi)(rng); };
    Controls u;
    for (std::size_t k = 0; k < 3; ++k) u.portfolio[k] = draw(b.portfolio[k]);
    u.consumption = draw(b.consumption);
    u.premium = draw(b.premium);
    return u;
}

struct Check {
    std::string name;
    double value;
    double threshold;
    bool pass;
};

bool verify_command(Outputs& o, const ScenarioConfig& c, const Solved& solved, std::ostream& out) {
    const BsdeSolution& sol = solved.solution;
    const TimeGrid grid = c.grid();
    const auto& v = c.verify;
    const DriverPaths drivers(grid, c.model.market.jumps, c.solver.seed, c.solver.paths);
    const ControlMode mode = is_power(c) ? ControlMode::fractional : ControlMode::absolute;

    std::vector<StrategyRule> strategies{optimal_strategy(c.utility, c.boxes)};
    std::mt19937_64 rng(c.solver.seed ^ 0x5bd1e995u);
    for (std::size_t k = 0; k < v.perturbations; ++k)
        strategies.push_back(StrategyRule::constant(mode, c.boxes, random_controls(rng, c.boxes),
                                                    "perturbation_" + to_string(k + 1)));
    const auto rep = supermartingale_check(c.model, c.utility, sol, strategies, c.x0, drivers);

    std::vector<Check> checks;
    checks.push_back({"solver_converged", solved.converged ? 1.0 : 0.0, 1.0, solved.converged});
    checks.push_back({"value_consistency_se", rep.value_consistency_se, v.threshold_se,
                      rep.value_consistency_se <= v.threshold_se});
    const auto& opt = rep.strategies.front();
    checks.push_back({"optimal_node_increment_max_se", opt.worst_increment_z, v.threshold_se,
                      opt.worst_increment_z <= v.threshold_se});

    double worst_dominance = -std::numeric_limits<double>::infinity();
    double best_separation = 0.0;
    double worst_gap = -std::numeric_limits<double>::infinity();
    std::vector<MeanSe> diffs;
    for (std::size_t k = 1; k < rep.strategies.size(); ++k) {
        const auto d = paired_difference(rep.strategies[k].value, opt.value);  // J_k - J_opt
        diffs.push_back(d);
        const double z = d.standard_error > 0.0 ? d.mean / d.standard_error : (d.mean > 0.0 ? INFINITY : -INFINITY);
        worst_dominance = std::max(worst_dominance, z);
        best_separation = std::max(best_separation, -z);
        const auto& g = rep.strategies[k];
        worst_gap = std::max(worst_gap, g.standard_error > 0.0 ? g.gap / g.standard_error : (g.gap > 0.0 ? INFINITY : 0.0));
    }
    if (v.perturbations > 0) {
        checks.push_back({"perturbation_dominance_max_se", worst_dominance, v.threshold_se,
                          worst_dominance <= v.threshold_se});
        checks.push_back({"far_perturbation_separation_se", best_separation, v.separation_se,
                          best_separation >= v.separation_se});
        checks.push_back({"perturbation_supermartingale_gap_max_se", worst_gap, v.threshold_se,
                          worst_gap <= v.threshold_se});
    }

    // Drift checks on states visited by the optimal strategy.
    const std::size_t ns = std::max<std::size_t>(v.drift_samples, 1);
    const DriverPaths sample_drivers(grid, c.model.market.jumps, c.solver.seed + 1, ns);
    const WealthPaths wp = optimal_wealth(c, sol, sample_drivers, strategies.front());
    std::vector<DriftState> samples;
    std::vector<Controls> random;
    for (std::size_t k = 0; k < ns; ++k) {
        if (wp.bankrupt[k]) continue;
        const std::size_t node = k % grid.steps;
        samples.push_back({node, wp.at(k, node)});
        random.push_back(random_controls(rng, c.boxes));
    }
    const auto at_opt = drift_residual(c.model, c.utility, c.boxes, sol, nullptr, samples);
    const auto off = drift_residual_controls(c.model, c.utility, c.boxes, sol, samples, random);
    checks.push_back({"drift_rms_at_optimum", at_opt.rms_residual_at_optimum, v.drift_tolerance,
                      at_opt.rms_residual_at_optimum <= v.drift_tolerance});
    checks.push_back({"drift_max_excursion_random_controls", off.max_positive_excursion, v.excursion_tolerance,
                      off.max_positive_excursion <= v.excursion_tolerance});
    checks.push_back({"positivity_violations", static_cast<double>(rep.positivity_violations), 0.0,
                      rep.positivity_violations == 0});
    const auto kq = exponent_bound_check(c.model, c.utility, strategies.front(), c.x0, sample_drivers, &sol);
    checks.push_back({is_power(c) ? "q_bound_violations" : "k_bound_violations", static_cast<double>(kq.violations),
                      0.0, kq.violations == 0});

    bool all = true;
    {
        CsvWriter w(o.path("verification.csv"), o.manifest(), {"check", "value", "threshold", "pass"});
        for (const auto& ch : checks) {
            w.row({ch.name, fmt(ch.value), fmt(ch.threshold), ch.pass ? "1" : "0"});
            all = all && ch.pass;
        }
        w.row({"bmo_constant_estimate", fmt(rep.bmo_constant_estimate), "nan", "1"});
        w.close();
    }
    {
        CsvWriter w(o.path("strategies.csv"), o.manifest(),
                    {"label", "value_mean", "value_se", "gap", "gap_se", "diff_vs_optimal", "diff_se", "worst_node_increment_se"});
        for (std::size_t k = 0; k < rep.strategies.size(); ++k) {
            const auto& s = rep.strategies[k];
            const MeanSe d = k == 0 ? MeanSe{} : diffs[k - 1];
            w.row({s.label, fmt(s.value.mean), fmt(s.value.standard_error), fmt(s.gap), fmt(s.standard_error),
                   fmt(d.mean), fmt(d.standard_error), fmt(s.worst_increment_z)});
        }
        w.close();
    }
    out << "V(0, x0) = " << fmt(rep.v_formula) << "\n";
    for (const auto& ch : checks)
        out << (ch.pass ? "PASS " : "FAIL ") << ch.name << " = " << fmt(ch.value) << " (threshold "
            << fmt(ch.threshold) << ")\n";
    out << "bmo_constant_estimate = " << fmt(rep.bmo_constant_estimate) << "\n";
    return all;
}

}  // namespace

Command parse_command(const std::string& name) {
    if (name == "simulate") return Command::simulate;
    if (name == "solve") return Command::solve;
    if (name == "value") return Command::value;
    if (name == "verify") return Command::verify;
    throw DomainError("unknown command '" + name + "'");
}

std::string command_name(Command c) {
    switch (c) {
        case Command::simulate: return "simulate";
        case Command::solve: return "solve";
        case Command::value: return "value";
        case Command::verify: return "verify";
    }
    return "?";
}

namespace {

ScenarioConfig apply_overrides(ScenarioConfig c, const RunOptions& o) {
    if (o.seed) c.solver.seed = *o.seed;
    if (o.paths) c.solver.paths = *o.paths;
    if (o.steps) c.solver.steps = *o.steps;
    return c;
}

}  // namespace

ScenarioConfig effective_config(const RunOptions& options) {
    return apply_overrides(load_config(options.config_path), options);
}

RunOutputs run(const RunOptions& options, std::ostream& out, std::ostream& err) {
    ScenarioConfig c;
    try {
        c = load_config(options.config_path);
    } catch (const ConfigError& e) {
        err << "config error: " << options.config_path << ": " << e.what() << "\n";
        return {kExitInvalid, {}, {}};
    }
    return run(c, options, out, err);
}

RunOutputs run(const ScenarioConfig& parsed, const RunOptions& options, std::ostream& out,
               std::ostream& err) {
    RunOutputs result;
    const ScenarioConfig c = apply_overrides(parsed, options);
    if (const auto problems = check_config(c); !problems.empty()) {
        err << "invalid configuration:\n" << problems;
        result.exit_code = kExitInvalid;
        return result;
    }
    result.config_hash = config_hash(c);
    Manifest m{ICINS_VERSION, result.config_hash, c.solver.seed, command_name(options.command)};
    try {
        Outputs o(options.output_dir, m);
        write_manifest(o, c);
        const Solved solved = solve_for(c);
        bool checks_ok = true;
        switch (options.command) {
            case Command::simulate: simulate_command(o, c, solved.solution, out); break;
            case Command::solve:
                write_solution(o, c, solved.solution);
                out << "Y(0) = " << fmt(solved.solution.y(0, c.x0)) << "\n";
                break;
            case Command::value: value_command(o, c, solved.solution, out); break;
            case Command::verify: checks_ok = verify_command(o, c, solved, out); break;
        }
        result.files = o.files();
        if (!solved.converged) {
            err << "backward solver did not converge within " << c.solver.picard.max_iterations
                << " Picard iterations\n";
            result.exit_code = kExitNotConverged;
        } else if (!checks_ok) {
            result.exit_code = kExitFailure;
        }
    } catch (const ValidationError& e) {
        err << "invalid configuration: " << e.what() << "\n";
        result.exit_code = kExitInvalid;
    } catch (const DomainError& e) {
        err << "invalid input: " << e.what() << "\n";
        result.exit_code = kExitInvalid;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        result.exit_code = kExitFailure;
    }
    return result;
}

}  // namespace icins
