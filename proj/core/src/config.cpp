#include "icins/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "icins/error.hpp"

namespace icins {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
};

using Section = std::map<std::string, Entry>;

class Reader {
public:
    explicit Reader(const std::string& text) {
        std::istringstream in(text);
        std::string raw;
        int line = 0;
        std::string section;
        while (std::getline(in, raw)) {
            ++line;
            const auto hash = raw.find('#');
            const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']') throw ConfigError("unterminated section header", line);
                section = trim(s.substr(1, s.size() - 2));
                if (!known_section(section)) throw ConfigError("unknown section [" + section + "]", line);
                if (!seen_.insert({section, line}).second)
                    throw ConfigError("duplicate section [" + section + "]", line);
                sections_[section];
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("expected key = value", line);
            if (section.empty()) throw ConfigError("key outside of any section", line);
            const std::string key = trim(s.substr(0, eq));
            const std::string value = trim(s.substr(eq + 1));
            if (key.empty()) throw ConfigError("empty key", line);
            auto& sec = sections_[section];
            if (sec.count(key)) throw ConfigError("duplicate key '" + key + "' in [" + section + "]", line);
            sec[key] = Entry{value, line, false};
        }
    }

    const Entry* find(const std::string& section, const std::string& key) {
        auto s = sections_.find(section);
        if (s == sections_.end()) return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        k->second.used = true;
        return &k->second;
    }

    /// Indexed keys "prefix.N" in a section, as (N, entry) ordered by N.
    std::vector<std::pair<std::size_t, const Entry*>> indexed(const std::string& section,
                                                              const std::string& prefix) {
        std::vector<std::pair<std::size_t, const Entry*>> out;
        auto s = sections_.find(section);
        if (s == sections_.end()) return out;
        for (auto& [key, entry] : s->second) {
            if (key.rfind(prefix + ".", 0) != 0) continue;
            const std::string idx = key.substr(prefix.size() + 1);
            std::size_t n = 0;
            const auto r = std::from_chars(idx.data(), idx.data() + idx.size(), n);
            if (idx.empty() || r.ec != std::errc() || r.ptr != idx.data() + idx.size())
                throw ConfigError("bad index in key '" + key + "'", entry.line);
            entry.used = true;
            out.emplace_back(n, &entry);
        }
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        return out;
    }

    void reject_unused() const {
        for (const auto& [name, sec] : sections_)
            for (const auto& [key, entry] : sec)
                if (!entry.used) throw ConfigError("unknown key '" + key + "' in [" + name + "]", entry.line);
    }

private:
    static bool known_section(const std::string& s) {
        static const char* names[] = {"market", "real_curve", "nominal_curve", "inflation", "risky",
                                      "jumps", "mortality", "insurance", "utility", "objective",
                                      "solver", "boxes", "verify", "run"};
        for (const char* n : names)
            if (s == n) return true;
        return false;
    }

    std::map<std::string, Section> sections_;
    std::map<std::string, int> seen_;
};

double parse_double(const std::string& s, int line, const std::string& what) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ConfigError("'" + what + "': expected a number, got '" + s + "'", line);
    if (!std::isfinite(v)) throw ConfigError("'" + what + "': value must be finite", line);
    return v;
}

std::uint64_t parse_uint(const std::string& s, int line, const std::string& what) {
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ConfigError("'" + what + "': expected a nonnegative integer, got '" + s + "'", line);
    return v;
}

std::vector<double> parse_list(const std::string& s, int line, const std::string& what) {
    std::vector<double> out;
    for (const auto& item : split(s, ',')) out.push_back(parse_double(item, line, what));
    return out;
}

// "v" or "t0: v0, t1: v1, ..."
StepFunction parse_step(const Entry& e, const std::string& what) {
    if (e.value.find(':') == std::string::npos) return StepFunction(parse_double(e.value, e.line, what));
    std::vector<double> knots, values;
    for (const auto& item : split(e.value, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) throw ConfigError("'" + what + "': expected knot: value pairs", e.line);
        knots.push_back(parse_double(parts[0], e.line, what));
        values.push_back(parse_double(parts[1], e.line, what));
    }
    try {
        return StepFunction(std::move(knots), std::move(values));
    } catch (const Error& err) {
        throw ConfigError("'" + what + "': " + err.what(), e.line);
    }
}

// "v" or "time knots ; maturity knots ; row-major values"
StepSurface parse_surface(const Entry& e, const std::string& what) {
    if (e.value.find(';') == std::string::npos) return StepSurface(parse_double(e.value, e.line, what));
    const auto parts = split(e.value, ';');
    if (parts.size() != 3)
        throw ConfigError("'" + what + "': expected time knots ; maturity knots ; values", e.line);
    try {
        return StepSurface(parse_list(parts[0], e.line, what), parse_list(parts[1], e.line, what),
                           parse_list(parts[2], e.line, what));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& err) {
        throw ConfigError("'" + what + "': " + err.what(), e.line);
    }
}

Interval parse_interval(const Entry& e, const std::string& what) {
    const auto v = parse_list(e.value, e.line, what);
    if (v.size() != 2) throw ConfigError("'" + what + "': expected lo, hi", e.line);
    if (!(v[0] <= v[1])) throw ConfigError("'" + what + "': lo must not exceed hi", e.line);
    return {v[0], v[1]};
}

template <class T, class F>
std::vector<T> parse_per_atom(Reader& r, const std::string& section, std::size_t atoms, F parse_one,
                              T zero) {
    std::vector<T> out(atoms, zero);
    for (const auto& [idx, entry] : r.indexed(section, "gamma")) {
        if (idx >= atoms)
            throw ConfigError("[" + section + "] gamma." + std::to_string(idx) + " refers to a missing jump atom",
                              entry->line);
        out[idx] = parse_one(*entry, section + ".gamma." + std::to_string(idx));
    }
    return out;
}

void read_curve(Reader& r, const std::string& section, std::size_t atoms, HjmCurve& c) {
    if (auto e = r.find(section, "initial_forward")) c.initial_forward = parse_step(*e, section + ".initial_forward");
    if (auto e = r.find(section, "alpha")) c.alpha = parse_surface(*e, section + ".alpha");
    if (auto e = r.find(section, "sigma")) c.sigma = parse_surface(*e, section + ".sigma");
    c.gamma = parse_per_atom<StepSurface>(r, section, atoms, parse_surface, StepSurface(0.0));
}

template <class T>
void read_number(Reader& r, const std::string& section, const std::string& key, T& out) {
    if (auto e = r.find(section, key)) {
        if constexpr (std::is_floating_point_v<T>) {
            out = parse_double(e->value, e->line, section + "." + key);
        } else {
            out = static_cast<T>(parse_uint(e->value, e->line, section + "." + key));
        }
    }
}

// Formatting -----------------------------------------------------------------------------------

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
    return s;
}

std::string step(const StepFunction& f) {
    if (f.is_constant()) return num(f.values()[0]);
    std::string s;
    for (std::size_t i = 0; i < f.knots().size(); ++i)
        s += (i ? ", " : "") + num(f.knots()[i]) + ": " + num(f.values()[i]);
    return s;
}

std::string surface(const StepSurface& f) {
    if (f.values().size() == 1) return num(f.values()[0]);
    return list(f.time_knots()) + " ; " + list(f.maturity_knots()) + " ; " + list(f.values());
}

std::string interval(const Interval& i) { return num(i.lo) + ", " + num(i.hi); }

void write_curve(std::ostringstream& o, const std::string& name, const HjmCurve& c) {
    o << "[" << name << "]\n";
    o << "initial_forward = " << step(c.initial_forward) << "\n";
    o << "alpha = " << surface(c.alpha) << "\n";
    o << "sigma = " << surface(c.sigma) << "\n";
    for (std::size_t j = 0; j < c.gamma.size(); ++j) o << "gamma." << j << " = " << surface(c.gamma[j]) << "\n";
    o << "\n";
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
    Reader r(text);
    ScenarioConfig c;
    auto& m = c.model.market;

    // Atoms first: every per-atom table is sized by them.
    for (const auto& [idx, entry] : r.indexed("jumps", "atom")) {
        if (idx != m.jumps.atoms.size())
            throw ConfigError("jump atoms must be numbered 0, 1, 2, ... without gaps", entry->line);
        const auto v = parse_list(entry->value, entry->line, "jumps.atom");
        if (v.size() != 2) throw ConfigError("jumps.atom: expected mark, intensity", entry->line);
        m.jumps.atoms.push_back({v[0], v[1]});
    }
    const std::size_t atoms = m.jumps.atoms.size();

    read_number(r, "objective", "horizon", m.horizon);
    m.bond_maturity = m.horizon;
    read_number(r, "market", "bond_maturity", m.bond_maturity);
    if (auto e = r.find("objective", "discount")) m.discount = parse_step(*e, "objective.discount");
    read_number(r, "objective", "x0", c.x0);

    read_curve(r, "real_curve", atoms, m.real_curve);
    read_curve(r, "nominal_curve", atoms, m.nominal_curve);

    read_number(r, "inflation", "initial_index", m.inflation.initial_index);
    if (auto e = r.find("inflation", "mu")) m.inflation.mu = parse_step(*e, "inflation.mu");
    if (auto e = r.find("inflation", "sigma")) m.inflation.sigma = parse_step(*e, "inflation.sigma");
    m.inflation.gamma = parse_per_atom<StepFunction>(r, "inflation", atoms, parse_step, StepFunction(0.0));

    read_number(r, "risky", "initial_price", m.risky.initial_price);
    if (auto e = r.find("risky", "mu")) m.risky.mu = parse_step(*e, "risky.mu");
    if (auto e = r.find("risky", "sigma")) m.risky.sigma = parse_step(*e, "risky.sigma");
    m.risky.gamma = parse_per_atom<StepFunction>(r, "risky", atoms, parse_step, StepFunction(0.0));

    c.model.mortality.horizon = m.horizon;
    if (auto e = r.find("mortality", "hazard")) c.model.mortality.hazard = parse_step(*e, "mortality.hazard");
    if (auto e = r.find("insurance", "premium_ratio"))
        c.model.contract.premium_ratio = parse_step(*e, "insurance.premium_ratio");

    if (auto e = r.find("utility", "kind")) {
        if (e->value == "power") c.utility.kind = UtilitySpec::Kind::power;
        else if (e->value == "exponential") c.utility.kind = UtilitySpec::Kind::exponential;
        else throw ConfigError("utility.kind must be 'power' or 'exponential'", e->line);
    }
    read_number(r, "utility", "delta", c.utility.delta);
    read_number(r, "utility", "kappa", c.utility.kappa);

    auto& s = c.solver;
    read_number(r, "solver", "steps", s.steps);
    read_number(r, "solver", "paths", s.paths);
    read_number(r, "solver", "seed", s.seed);
    if (auto e = r.find("solver", "degree")) {
        const auto d = parse_uint(e->value, e->line, "solver.degree");
        if (d > 8) throw ConfigError("solver.degree must be at most 8", e->line);
        s.regression.degree = static_cast<int>(d);
    }
    read_number(r, "solver", "ridge", s.regression.ridge);
    read_number(r, "solver", "damping", s.picard.damping);
    if (auto e = r.find("solver", "max_iterations")) {
        const auto d = parse_uint(e->value, e->line, "solver.max_iterations");
        if (d == 0 || d > 100000) throw ConfigError("solver.max_iterations must lie in [1, 100000]", e->line);
        s.picard.max_iterations = static_cast<int>(d);
    }
    read_number(r, "solver", "tolerance", s.picard.tolerance);
    read_number(r, "solver", "dump_paths", s.dump_paths);

    if (auto e = r.find("boxes", "consumption")) c.boxes.consumption = parse_interval(*e, "boxes.consumption");
    if (auto e = r.find("boxes", "premium")) c.boxes.premium = parse_interval(*e, "boxes.premium");
    for (int k = 0; k < 3; ++k) {
        const std::string key = "portfolio" + std::to_string(k + 1);
        if (auto e = r.find("boxes", key)) c.boxes.portfolio[static_cast<std::size_t>(k)] = parse_interval(*e, "boxes." + key);
    }

    auto& v = c.verify;
    read_number(r, "verify", "perturbations", v.perturbations);
    read_number(r, "verify", "threshold_se", v.threshold_se);
    read_number(r, "verify", "separation_se", v.separation_se);
    read_number(r, "verify", "drift_tolerance", v.drift_tolerance);
    read_number(r, "verify", "excursion_tolerance", v.excursion_tolerance);
    read_number(r, "verify", "drift_samples", v.drift_samples);

    // Manifest bookkeeping; informational only.
    r.find("run", "command");
    r.find("run", "version");
    r.find("run", "config_hash");

    r.reject_unused();
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'", 0);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const ScenarioConfig& c) {
    const auto& m = c.model.market;
    std::ostringstream o;
    o << "[objective]\nhorizon = " << num(m.horizon) << "\ndiscount = " << step(m.discount)
      << "\nx0 = " << num(c.x0) << "\n\n";
    o << "[market]\nbond_maturity = " << num(m.bond_maturity) << "\n\n";
    o << "[jumps]\n";
    for (std::size_t j = 0; j < m.jumps.size(); ++j)
        o << "atom." << j << " = " << num(m.jumps.atoms[j].mark) << ", " << num(m.jumps.atoms[j].intensity) << "\n";
    o << "\n";
    write_curve(o, "real_curve", m.real_curve);
    write_curve(o, "nominal_curve", m.nominal_curve);
    o << "[inflation]\ninitial_index = " << num(m.inflation.initial_index) << "\nmu = " << step(m.inflation.mu)
      << "\nsigma = " << step(m.inflation.sigma) << "\n";
    for (std::size_t j = 0; j < m.inflation.gamma.size(); ++j)
        o << "gamma." << j << " = " << step(m.inflation.gamma[j]) << "\n";
    o << "\n[risky]\ninitial_price = " << num(m.risky.initial_price) << "\nmu = " << step(m.risky.mu)
      << "\nsigma = " << step(m.risky.sigma) << "\n";
    for (std::size_t j = 0; j < m.risky.gamma.size(); ++j)
        o << "gamma." << j << " = " << step(m.risky.gamma[j]) << "\n";
    o << "\n[mortality]\nhazard = " << step(c.model.mortality.hazard) << "\n\n";
    o << "[insurance]\npremium_ratio = " << step(c.model.contract.premium_ratio) << "\n\n";
    o << "[utility]\nkind = " << (c.utility.kind == UtilitySpec::Kind::power ? "power" : "exponential")
      << "\ndelta = " << num(c.utility.delta) << "\nkappa = " << num(c.utility.kappa) << "\n\n";
    const auto& s = c.solver;
    o << "[solver]\nsteps = " << s.steps << "\npaths = " << s.paths << "\nseed = " << s.seed
      << "\ndegree = " << s.regression.degree << "\nridge = " << num(s.regression.ridge)
      << "\ndamping = " << num(s.picard.damping) << "\nmax_iterations = " << s.picard.max_iterations
      << "\ntolerance = " << num(s.picard.tolerance) << "\ndump_paths = " << s.dump_paths << "\n\n";
    o << "[boxes]\nconsumption = " << interval(c.boxes.consumption) << "\npremium = " << interval(c.boxes.premium)
      << "\nportfolio1 = " << interval(c.boxes.portfolio[0]) << "\nportfolio2 = " << interval(c.boxes.portfolio[1])
      << "\nportfolio3 = " << interval(c.boxes.portfolio[2]) << "\n\n";
    const auto& v = c.verify;
    o << "[verify]\nperturbations = " << v.perturbations << "\nthreshold_se = " << num(v.threshold_se)
      << "\nseparation_se = " << num(v.separation_se) << "\ndrift_tolerance = " << num(v.drift_tolerance)
      << "\nexcursion_tolerance = " << num(v.excursion_tolerance) << "\ndrift_samples = " << v.drift_samples
      << "\n";
    return o.str();
}

std::string config_hash(const ScenarioConfig& config) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : serialize_config(config)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

std::string check_config(const ScenarioConfig& c) {
    std::string out;
    const auto add = [&](const std::string& s) { out += s + "\n"; };
    const auto report = validate_scenario(c.model.market);
    for (const auto& issue : report.issues)
        if (issue.severity == ValidationIssue::Severity::error) add(issue.field + ": " + issue.message);
    if (const auto ins = validate_insurance(c.model.mortality, c.model.contract); !ins.empty()) add("insurance: " + ins);
    try {
        c.utility.validate();
    } catch (const Error& e) {
        add(e.what());
    }
    if (!(c.x0 > 0.0)) add("objective.x0 must be positive");
    if (c.solver.steps == 0) add("solver.steps must be positive");
    if (c.solver.paths < 2) add("solver.paths must be at least 2");
    try {
        c.solver.regression.validate();
        c.solver.picard.validate();
    } catch (const Error& e) {
        add(e.what());
    }
    if (c.utility.kind == UtilitySpec::Kind::power) {
        if (!(c.boxes.consumption.lo >= 0.0)) add("boxes.consumption: power utility needs xi >= 0");
        const double eta_min = c.model.contract.premium_ratio.inf();
        if (!(c.boxes.premium.lo > -eta_min)) add("boxes.premium: power utility needs 1 + zeta/eta > 0 on the box");
    }
    return out;
}

}  // namespace icins
