#include "icins/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "icins/error.hpp"

namespace icins {

double JumpMeasure::total_intensity() const {
    double total = 0.0;
    for (const auto& a : atoms) total += a.intensity;
    return total;
}

double spot_rate(const HjmCurve& curve, double t) {
    // alpha(u, t) integrated over u in [0, t] at fixed maturity t.
    return curve.initial_forward(t) + curve.alpha.integral_time(t, 0.0, t);
}

BondCoefficients bond_loading_coefficients(const HjmCurve& curve, const JumpMeasure& jumps,
                                           double t, double maturity) {
    if (t > maturity) throw DomainError("bond_loading_coefficients: t exceeds maturity");
    if (t < 0.0) throw DomainError("bond_loading_coefficients: negative time");
    if (curve.gamma.size() != jumps.size())
        throw DomainError("bond_loading_coefficients: curve has " +
                          std::to_string(curve.gamma.size()) + " jump surfaces for " +
                          std::to_string(jumps.size()) + " atoms");
    BondCoefficients out;
    out.spot_rate = spot_rate(curve, t);
    out.b = -curve.sigma.integral_maturity(t, t, maturity);
    out.c.resize(jumps.size());
    double compensator = 0.0;
    for (std::size_t j = 0; j < jumps.size(); ++j) {
        out.c[j] = -curve.gamma[j].integral_maturity(t, t, maturity);
        compensator += out.c[j] * jumps.atoms[j].intensity;
    }
    out.a = out.spot_rate - curve.alpha.integral_maturity(t, t, maturity) + 0.5 * out.b * out.b -
            compensator;
    return out;
}

RealBondDynamics real_bond_dynamics(const BondCoefficients& real_bond, const InflationModel& infl,
                                    const JumpMeasure& jumps, double t) {
    if (real_bond.c.size() != jumps.size() || infl.gamma.size() != jumps.size())
        throw DomainError("real_bond_dynamics: per-atom sizes do not match the jump measure");
    RealBondDynamics out;
    out.a_tilde = real_bond.a + infl.mu(t);
    out.c_tilde.resize(jumps.size());
    for (std::size_t j = 0; j < jumps.size(); ++j) {
        const double cr = real_bond.c[j];
        const double gi = infl.gamma[j](t);
        out.a_tilde += cr * gi * jumps.atoms[j].intensity;
        out.c_tilde[j] = cr + gi + cr * gi;
    }
    return out;
}

MarketPricesOfRisk market_prices_of_risk(const MarketScenario& sc, double t, double maturity) {
    const auto bond = bond_loading_coefficients(sc.real_curve, sc.jumps, t, maturity);
    const auto real = real_bond_dynamics(bond, sc.inflation, sc.jumps, t);
    const double sigma_i = sc.inflation.sigma(t);
    const double sigma_s = sc.risky.sigma(t);
    if (bond.b == 0.0) throw DegenerateMarketError("market price of risk: b_r(t,T) = 0");
    if (sigma_i == 0.0) throw DegenerateMarketError("market price of risk: sigma_I(t) = 0");
    if (sigma_s == 0.0) throw DegenerateMarketError("market price of risk: sigma_S(t) = 0");
    const double r = bond.spot_rate;
    const double mu_i = sc.inflation.mu(t);
    MarketPricesOfRisk out;
    out.phi1 = (real.a_tilde - r) / bond.b;
    out.phi2 = mu_i / sigma_i;
    out.phi3 = (sc.risky.mu(t) - r) / sigma_s;
    out.phi1_net = (real.a_tilde - r - mu_i) / bond.b;
    return out;
}

bool ValidationReport::ok() const { return error_count() == 0; }

std::size_t ValidationReport::error_count() const {
    return static_cast<std::size_t>(std::count_if(issues.begin(), issues.end(), [](const auto& i) {
        return i.severity == ValidationIssue::Severity::error;
    }));
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& i : issues) {
        os << (i.severity == ValidationIssue::Severity::error ? "error" : "warning") << ": "
           << i.field << ": " << i.message << '\n';
    }
    return os.str();
}

namespace {

class Collector {
public:
    explicit Collector(ValidationReport& r) : report_(r) {}
    void error(std::string field, std::string msg) {
        report_.issues.push_back({ValidationIssue::Severity::error, std::move(field), std::move(msg)});
    }
    void warning(std::string field, std::string msg) {
        report_.issues.push_back(
            {ValidationIssue::Severity::warning, std::move(field), std::move(msg)});
    }

private:
    ValidationReport& report_;
};

std::string atom_name(const JumpMeasure& jumps, std::size_t j) {
    std::ostringstream os;
    os << "atom " << j << " (mark " << jumps.atoms[j].mark << ")";
    return os.str();
}

// Times at which a per-atom loading built from these tables can attain its extremes on [0, T].
std::vector<double> probe_times(const MarketScenario& sc) {
    std::set<double> ts{0.0, sc.horizon};
    auto add = [&](const std::vector<double>& knots) {
        for (double k : knots)
            if (k <= sc.horizon) ts.insert(k);
    };
    add(sc.inflation.mu.knots());
    add(sc.inflation.sigma.knots());
    for (const auto& g : sc.inflation.gamma) add(g.knots());
    for (const auto& g : sc.risky.gamma) add(g.knots());
    for (const auto& g : sc.real_curve.gamma) {
        add(g.time_knots());
        add(g.maturity_knots());
    }
    for (const auto& g : sc.nominal_curve.gamma) {
        add(g.time_knots());
        add(g.maturity_knots());
    }
    std::vector<double> out;
    for (double t : ts) {
        out.push_back(t);
        // Just left of a knot, where the previous piece still applies.
        if (t > 0.0) out.push_back(std::nextafter(t, 0.0));
    }
    return out;
}

void check_curve(const MarketScenario& sc, const HjmCurve& curve, const std::string& name,
                 Collector& out) {
    if (curve.gamma.size() != sc.jumps.size()) {
        out.error(name + ".gamma", "expected one surface per jump atom (" +
                                       std::to_string(sc.jumps.size()) + "), got " +
                                       std::to_string(curve.gamma.size()));
        return;
    }
    if (!curve.sigma.vanishes_up_to_maturity(sc.horizon))
        out.error(name + ".sigma",
                  "must vanish for maturities below the horizon (deterministic spot rate)");
    for (std::size_t j = 0; j < curve.gamma.size(); ++j) {
        if (!curve.gamma[j].vanishes_up_to_maturity(sc.horizon))
            out.error(name + ".gamma", atom_name(sc.jumps, j) +
                                           ": must vanish for maturities below the horizon");
    }
}

}  // namespace

ValidationReport validate_scenario(const MarketScenario& sc) {
    ValidationReport report;
    Collector out(report);

    if (!(sc.horizon > 0.0) || !std::isfinite(sc.horizon)) out.error("horizon", "must be positive");
    if (!(sc.bond_maturity >= sc.horizon))
        out.error("bond_maturity", "must be at least the horizon");

    std::set<double> marks;
    for (std::size_t j = 0; j < sc.jumps.size(); ++j) {
        const auto& a = sc.jumps.atoms[j];
        if (!std::isfinite(a.mark)) out.error("jumps", atom_name(sc.jumps, j) + ": non-finite mark");
        if (!marks.insert(a.mark).second)
            out.error("jumps", atom_name(sc.jumps, j) + ": duplicate mark");
        if (!(a.intensity >= 0.0) || !std::isfinite(a.intensity))
            out.error("jumps", atom_name(sc.jumps, j) + ": intensity must be finite and >= 0");
    }

    if (!(sc.inflation.initial_index > 0.0)) out.error("inflation.initial_index", "must be positive");
    if (!(sc.risky.initial_price > 0.0)) out.error("risky.initial_price", "must be positive");
    if (sc.discount.inf() < 0.0) out.error("discount", "must be nonnegative");

    check_curve(sc, sc.real_curve, "real_curve", out);
    check_curve(sc, sc.nominal_curve, "nominal_curve", out);

    bool sizes_ok = sc.real_curve.gamma.size() == sc.jumps.size() &&
                    sc.nominal_curve.gamma.size() == sc.jumps.size();
    if (sc.inflation.gamma.size() != sc.jumps.size()) {
        out.error("inflation.gamma", "expected one function per jump atom");
        sizes_ok = false;
    }
    if (sc.risky.gamma.size() != sc.jumps.size()) {
        out.error("risky.gamma", "expected one function per jump atom");
        sizes_ok = false;
    }
    if (!sizes_ok) return report;

    for (std::size_t j = 0; j < sc.jumps.size(); ++j) {
        if (sc.inflation.gamma[j].inf() <= -1.0)
            out.error("inflation.gamma", atom_name(sc.jumps, j) + ": gamma_I must exceed -1");
        if (sc.risky.gamma[j].inf() <= -1.0)
            out.error("risky.gamma", atom_name(sc.jumps, j) + ": gamma_S must exceed -1");
    }

    if (sizes_ok && sc.horizon > 0.0 && sc.bond_maturity >= sc.horizon) {
        bool ctilde_bad = false, cr_bad = false, cn_bad = false, br_zero = false;
        for (double t : probe_times(sc)) {
            if (t < 0.0 || t > sc.horizon) continue;
            const auto real = bond_loading_coefficients(sc.real_curve, sc.jumps, t, sc.bond_maturity);
            const auto nominal =
                bond_loading_coefficients(sc.nominal_curve, sc.jumps, t, sc.bond_maturity);
            const auto dyn = real_bond_dynamics(real, sc.inflation, sc.jumps, t);
            if (real.b == 0.0 && t < sc.horizon) br_zero = true;
            for (std::size_t j = 0; j < sc.jumps.size(); ++j) {
                if (!ctilde_bad && dyn.c_tilde[j] <= -1.0) {
                    ctilde_bad = true;
                    out.error("real_bond.C_tilde", atom_name(sc.jumps, j) + ": must exceed -1");
                }
                if (!cr_bad && real.c[j] <= -1.0) {
                    cr_bad = true;
                    out.error("real_curve.c", atom_name(sc.jumps, j) + ": bond jump loading must exceed -1");
                }
                if (!cn_bad && nominal.c[j] <= -1.0) {
                    cn_bad = true;
                    out.error("nominal_curve.c", atom_name(sc.jumps, j) + ": bond jump loading must exceed -1");
                }
            }
        }
        if (br_zero) out.warning("real_curve.sigma", "b_r vanishes; phi1 is undefined there");
    }
    if (sc.inflation.sigma.is_zero())
        out.warning("inflation.sigma", "sigma_I vanishes; phi2 is undefined");
    if (sc.risky.sigma.is_zero()) out.warning("risky.sigma", "sigma_S vanishes; phi3 is undefined");
    return report;
}

}  // namespace icins
