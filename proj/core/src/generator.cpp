#include "icins/generator.hpp"

#include <algorithm>
#include <cmath>
#include <vector>
#include <limits>

#include "icins/error.hpp"

namespace icins {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// u = J theta with J = [[1,0,0],[1,1,0],[0,0,1]]; maps a gradient in u back to theta.
Eigen::Vector3d pull_back(const Eigen::Vector3d& gu) { return {gu[0] + gu[1], gu[1], gu[2]}; }

Eigen::Matrix3d pull_back_hessian(const Eigen::Vector3d& diag_u) {
    Eigen::Matrix3d J;
    J << 1, 0, 0, 1, 1, 0, 0, 0, 1;
    return J.transpose() * diag_u.asDiagonal() * J;
}

Eigen::Vector3d as_vec(const Vec3& v) { return {v[0], v[1], v[2]}; }

void check_upsilon(const GeneratorInputs& in, const LocalCoefficients& lc) {
    if (in.upsilon.size() != lc.atoms())
        throw DomainError("generator inputs: upsilon needs one value per jump atom");
}

bool has_active_jumps(const LocalCoefficients& lc) {
    for (double w : lc.weights)
        if (w > 0.0) return true;
    return false;
}

double sum_sq(const Vec3& v) { return v[0] * v[0] + v[1] * v[1] + v[2] * v[2]; }

class ExponentialThetaObjective final : public Objective3 {
public:
    ExponentialThetaObjective(const GeneratorInputs& in, const LocalCoefficients& lc, double delta)
        : in_(in), lc_(lc), delta_(delta) {}

    double value(const Vec3& theta) const override {
        return theta_minimand_exponential(theta, in_, lc_, delta_, &saturated_);
    }

    void derivatives(const Vec3& theta, Eigen::Vector3d& g, Eigen::Matrix3d& H) const override {
        const Vec3 u = LocalCoefficients::slots(theta);
        Eigen::Vector3d gu, hu;
        for (int i = 0; i < 3; ++i) {
            if (lc_.degenerate[i]) {
                gu[i] = -lc_.net_excess[i];
                hu[i] = 0.0;
            } else {
                const double s = lc_.scale[i];
                const double v = u[i] * s;
                gu[i] = delta_ * s * (v - in_.z[i] - lc_.psi[i] / delta_);
                hu[i] = delta_ * s * s;
            }
        }
        g = pull_back(gu);
        H = pull_back_hessian(hu);
        for (std::size_t j = 0; j < lc_.atoms(); ++j) {
            const double w = lc_.weights[j];
            if (w == 0.0) continue;
            const Eigen::Vector3d gh = as_vec(lc_.gamma_hat[j]);
            const double e = capped_exp(delta_ * (in_.upsilon[j] - lc_.jump_exposure(theta, j)), &saturated_);
            g -= w * (e - 1.0) * gh;
            H += w * delta_ * e * gh * gh.transpose();
        }
    }

    bool saturated() const { return saturated_; }

private:
    const GeneratorInputs& in_;
    const LocalCoefficients& lc_;
    double delta_;
    mutable bool saturated_ = false;
};

class PowerThetaObjective final : public Objective3 {
public:
    PowerThetaObjective(const GeneratorInputs& in, const LocalCoefficients& lc, double kappa)
        : in_(in), lc_(lc), kappa_(kappa) {}

    double value(const Vec3& pi) const override {
        return theta_minimand_power(pi, in_, lc_, kappa_, &saturated_);
    }

    void derivatives(const Vec3& pi, Eigen::Vector3d& g, Eigen::Matrix3d& H) const override {
        const double a = 1.0 - kappa_;
        const Vec3 u = LocalCoefficients::slots(pi);
        Eigen::Vector3d gu, hu;
        for (int i = 0; i < 3; ++i) {
            if (lc_.degenerate[i]) {
                gu[i] = -lc_.net_excess[i];
                hu[i] = 0.0;
            } else {
                const double s = lc_.scale[i];
                gu[i] = a * s * (u[i] * s - (in_.z[i] + lc_.psi[i]) / a);
                hu[i] = a * s * s;
            }
        }
        g = pull_back(gu);
        H = pull_back_hessian(hu);
        for (std::size_t j = 0; j < lc_.atoms(); ++j) {
            const double w = lc_.weights[j];
            if (w == 0.0) continue;
            const Eigen::Vector3d gh = as_vec(lc_.gamma_hat[j]);
            const double base = 1.0 + lc_.jump_exposure(pi, j);
            const double eu = capped_exp(in_.upsilon[j], &saturated_);
            g -= w * (std::pow(base, kappa_ - 1.0) * eu - 1.0) * gh;
            H += w * a * std::pow(base, kappa_ - 2.0) * eu * gh * gh.transpose();
        }
    }

    bool saturated() const { return saturated_; }

private:
    const GeneratorInputs& in_;
    const LocalCoefficients& lc_;
    double kappa_;
    mutable bool saturated_ = false;
};

OptimalControls from_newton(const NewtonResult& r, bool saturated) {
    OptimalControls out;
    out.portfolio = r.x;
    out.minimand_value = r.value;
    out.gradient_norm = r.projected_gradient_norm;
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.saturated = saturated;
    return out;
}

}  // namespace

void UtilitySpec::validate() const {
    if (kind == Kind::exponential) {
        if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("utility: delta must be positive");
    } else {
        if (!(kappa < 1.0) || kappa == 0.0 || !std::isfinite(kappa))
            throw DomainError("utility: kappa must lie in (-inf, 1) without 0");
    }
}

double capped_exp(double a, bool* saturated) {
    if (a > kExponentCap) {
        if (saturated) *saturated = true;
        return std::exp(kExponentCap);
    }
    return std::exp(a);
}

double m_function(double x, double delta) {
    // expm1 keeps the small-x regime accurate.
    return (std::expm1(delta * x) - delta * x) / delta;
}

double theta_minimand_exponential(const Vec3& theta, const GeneratorInputs& in,
                                  const LocalCoefficients& lc, double delta, bool* saturated) {
    check_upsilon(in, lc);
    const Vec3 u = LocalCoefficients::slots(theta);
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
        if (lc.degenerate[i]) {
            total += -u[i] * lc.net_excess[i] + 0.5 * delta * in.z[i] * in.z[i];
        } else {
            const double d = u[i] * lc.scale[i] - in.z[i] - lc.psi[i] / delta;
            total += 0.5 * delta * d * d;
        }
    }
    for (std::size_t j = 0; j < lc.atoms(); ++j) {
        const double w = lc.weights[j];
        if (w == 0.0) continue;
        const double arg = in.upsilon[j] - lc.jump_exposure(theta, j);
        if (delta * arg > kExponentCap) {
            if (saturated) *saturated = true;
            total += w * (std::exp(kExponentCap) - 1.0 - delta * arg) / delta;
        } else {
            total += w * m_function(arg, delta);
        }
    }
    return total;
}

OptimalControls argmin_theta_exponential(const GeneratorInputs& in, const LocalCoefficients& lc,
                                         double delta, const Box3& box,
                                         const NewtonSettings& settings) {
    check_upsilon(in, lc);
    ExponentialThetaObjective f(in, lc, delta);
    const auto r = minimize_on_box(f, box, settings);
    return from_newton(r, f.saturated());
}

namespace {

ClosedFormPortfolio closed_form_nojump(const GeneratorInputs& in, const LocalCoefficients& lc,
                                       double scale_factor, bool exponential, double delta) {
    if (has_active_jumps(lc))
        throw DomainError("closed-form portfolio requires a jump-free market");
    const double b = lc.scale[0], si = lc.scale[1], ss = lc.scale[2];
    if (b == 0.0) throw DegenerateMarketError("closed-form portfolio: b_r = 0");
    if (si == 0.0) throw DegenerateMarketError("closed-form portfolio: sigma_I = 0");
    if (ss == 0.0) throw DegenerateMarketError("closed-form portfolio: sigma_S = 0");
    ClosedFormPortfolio out;
    // Slot targets v_i*, then undo u = (theta1, theta1 + theta2, theta3).
    Vec3 target{};
    for (int i = 0; i < 3; ++i)
        target[i] = exponential ? in.z[i] + lc.psi[i] / delta : (in.z[i] + lc.psi[i]) / scale_factor;
    const double u1 = target[0] / b, u2 = target[1] / si, u3 = target[2] / ss;
    out.foc = {u1, u2 - u1, u3};

    const double excess_bond = lc.a_tilde - lc.r;  // A~ - r, as printed
    const double mu_i = lc.mu_i;
    const double excess_share = lc.mu_s - lc.r;
    if (exponential) {
        out.printed[0] = (excess_bond - mu_i) / (delta * b * b) + in.z[0] / b;
        out.printed[1] = ((1.0 / (si * si) + 1.0 / (b * b)) * mu_i - excess_bond / (b * b) +
                          in.z[1] / si - in.z[0] / b) /
                         delta;
        out.printed[2] = excess_share / (delta * ss * ss) + in.z[2] / ss;
    } else {
        const double f = 1.0 / scale_factor;
        out.printed[0] = f * ((excess_bond - mu_i) / (b * b) + in.z[0] / b);
        out.printed[1] = f * ((1.0 / (si * si) + 1.0 / (b * b)) * mu_i - excess_bond / (b * b) +
                              in.z[1] / si - in.z[0] / b);
        out.printed[2] = f * (excess_share / (ss * ss) + in.z[2] / ss);
    }
    return out;
}

}  // namespace

ClosedFormPortfolio closed_form_theta_nojump_exponential(const GeneratorInputs& in,
                                                         const LocalCoefficients& lc, double delta) {
    return closed_form_nojump(in, lc, 1.0, true, delta);
}

double optimal_consumption_exponential(double x, double y, double /*delta*/, const Interval& box) {
    return box.clamp(x - y);
}

double printed_consumption_exponential(double x, double y, double delta) {
    return x - y + std::log(delta) / delta;
}

PremiumChoice optimal_premium_exponential(double y, double delta, double hazard, double eta,
                                          const Interval& box) {
    if (!(eta > 0.0)) throw DomainError("optimal premium: eta must be positive");
    if (!(delta > 0.0)) throw DomainError("optimal premium: delta must be positive");
    if (hazard <= 0.0) return {box.lo, true};
    return {box.clamp(eta * (std::log(hazard / eta) / delta - y)), false};
}

double printed_premium_exponential(double y, double delta, double hazard, double eta) {
    return eta * (std::log(delta * hazard / eta) / delta - y);
}

double lambda_exponential(const GeneratorInputs& in, const LocalCoefficients& lc, double delta,
                          const Controls& u, bool* saturated) {
    check_upsilon(in, lc);
    const double x = in.x, y = in.y;
    const double eta = lc.premium_ratio, lam = lc.hazard;
    double total = capped_exp(delta * (x - y - u.consumption), saturated) / delta;
    if (lam != 0.0) total += lam * capped_exp(-delta * (y + u.premium / eta), saturated) / delta;
    total += -(lc.discount + lam) / delta - lc.r * x - lc.mean_excess(u.portfolio) + u.consumption +
             u.premium;
    const Vec3 v = lc.loading(u.portfolio);
    for (int i = 0; i < 3; ++i) total += 0.5 * delta * (v[i] - in.z[i]) * (v[i] - in.z[i]);
    for (std::size_t j = 0; j < lc.atoms(); ++j) {
        const double w = lc.weights[j];
        if (w == 0.0) continue;
        const double arg = in.upsilon[j] - lc.jump_exposure(u.portfolio, j);
        if (delta * arg > kExponentCap) {
            if (saturated) *saturated = true;
            total += w * (std::exp(kExponentCap) - 1.0 - delta * arg) / delta;
        } else {
            total += w * m_function(arg, delta);
        }
    }
    return total;
}

namespace {

// sum over regular slots of psi_i z_i + psi_i^2 / (2 delta).
double exponential_offset(const GeneratorInputs& in, const LocalCoefficients& lc, double delta) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
        if (lc.degenerate[i]) continue;
        s += lc.psi[i] * in.z[i] + lc.psi[i] * lc.psi[i] / (2.0 * delta);
    }
    return s;
}

}  // namespace

GeneratorValue generator_exponential(const GeneratorInputs& in, const LocalCoefficients& lc,
                                     double delta, const ControlBoxes& boxes, GeneratorForm form) {
    if (!(delta > 0.0)) throw DomainError("generator_exponential: delta must be positive");
    GeneratorValue out;
    out.controls = argmin_theta_exponential(in, lc, delta, boxes.portfolio);
    const double eta = lc.premium_ratio, lam = lc.hazard;
    out.controls.consumption = optimal_consumption_exponential(in.x, in.y, delta, boxes.consumption);
    const auto prem = optimal_premium_exponential(in.y, delta, lam, eta, boxes.premium);
    out.controls.premium = prem.value;
    out.controls.hazard_clamped = prem.hazard_clamped;

    const double theta_part = out.controls.minimand_value - exponential_offset(in, lc, delta);
    switch (form) {
        case GeneratorForm::inf_form: {
            bool sat = false;
            out.value = lambda_exponential(in, lc, delta, out.controls.controls(), &sat);
            out.controls.saturated = out.controls.saturated || sat;
            break;
        }
        case GeneratorForm::closed_form:
            out.value = (1.0 - lc.r) * in.x +
                        (1.0 + eta - lc.discount - lam + eta * std::log(lam / eta)) / delta -
                        (1.0 + eta) * in.y + theta_part;
            break;
        case GeneratorForm::printed_literal:
            out.value = (1.0 - lc.r) * in.x +
                        (1.0 + eta - lc.discount - lam + std::log(delta) +
                         eta * std::log(delta * lam / eta)) /
                            delta -
                        (1.0 + eta / delta) * in.y + theta_part;
            break;
    }
    return out;
}

double theta_minimand_power(const Vec3& pi, const GeneratorInputs& in, const LocalCoefficients& lc,
                            double kappa, bool* saturated) {
    check_upsilon(in, lc);
    const double a = 1.0 - kappa;
    const Vec3 u = LocalCoefficients::slots(pi);
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
        if (lc.degenerate[i]) {
            total -= u[i] * lc.net_excess[i];
        } else {
            const double d = u[i] * lc.scale[i] - (in.z[i] + lc.psi[i]) / a;
            total += 0.5 * a * d * d;
        }
    }
    for (std::size_t j = 0; j < lc.atoms(); ++j) {
        const double w = lc.weights[j];
        if (w == 0.0) continue;
        const double g = lc.jump_exposure(pi, j);
        if (!(1.0 + g > 0.0)) return kInf;
        const double ups = in.upsilon[j];
        total -= w * (std::pow(1.0 + g, kappa) * capped_exp(ups, saturated) - 1.0 - kappa * g - ups) /
                 kappa;
    }
    return total;
}

OptimalControls argmin_theta_power(const GeneratorInputs& in, const LocalCoefficients& lc,
                                   double kappa, const Box3& box, const NewtonSettings& settings) {
    check_upsilon(in, lc);
    PowerThetaObjective f(in, lc, kappa);
    if (!std::isfinite(f.value({box[0].clamp(0.0), box[1].clamp(0.0), box[2].clamp(0.0)})))
        throw DomainError("argmin_theta_power: the box's closest point to 0 violates 1 + <pi, gamma> > 0");
    const auto r = minimize_on_box(f, box, settings);
    return from_newton(r, f.saturated());
}

ClosedFormPortfolio closed_form_pi_nojump(const GeneratorInputs& in, const LocalCoefficients& lc,
                                          double kappa) {
    return closed_form_nojump(in, lc, 1.0 - kappa, false, 1.0);
}

FractionChoice optimal_fractions_power(double y, double kappa, double hazard, double eta,
                                       const ControlBoxes& boxes) {
    if (!(eta > 0.0)) throw DomainError("optimal fractions: eta must be positive");
    FractionChoice out;
    const double ey = std::exp(-y / (1.0 - kappa));
    out.xi = boxes.consumption.clamp(ey);
    if (hazard <= 0.0) {
        out.zeta = boxes.premium.lo;
        out.hazard_clamped = true;
    } else {
        out.zeta = boxes.premium.clamp(eta * (std::pow(eta / hazard, -1.0 / (1.0 - kappa)) * ey - 1.0));
    }
    return out;
}

double power_drift_objective(const GeneratorInputs& in, const LocalCoefficients& lc, double kappa,
                             const Controls& u, bool* saturated) {
    check_upsilon(in, lc);
    const double eta = lc.premium_ratio, lam = lc.hazard;
    const double xi = u.consumption, zeta = u.premium;
    const double legacy_ratio = 1.0 + zeta / eta;
    if (!(xi > 0.0) && kappa < 0.0) return -kInf;
    if (lam != 0.0 && !(legacy_ratio > 0.0)) return -kInf;
    double running = std::pow(xi, kappa);
    if (lam != 0.0) running += lam * std::pow(legacy_ratio, kappa);
    double total = capped_exp(-in.y, saturated) * running / kappa;
    total += -(lc.discount + lam) / kappa + lc.r + lc.mean_excess(u.portfolio) - xi - zeta;
    const Vec3 v = lc.loading(u.portfolio);
    total += 0.5 * (kappa - 1.0) * sum_sq(v) + v[0] * in.z[0] + v[1] * in.z[1] + v[2] * in.z[2] +
             sum_sq(in.z) / (2.0 * kappa);
    for (std::size_t j = 0; j < lc.atoms(); ++j) {
        const double w = lc.weights[j];
        if (w == 0.0) continue;
        const double g = lc.jump_exposure(u.portfolio, j);
        if (!(1.0 + g > 0.0)) return -kInf;
        const double ups = in.upsilon[j];
        total += w * (std::pow(1.0 + g, kappa) * capped_exp(ups, saturated) - 1.0 - kappa * g - ups) /
                 kappa;
    }
    return total;
}

GeneratorValue generator_power(const GeneratorInputs& in, const LocalCoefficients& lc, double kappa,
                               const ControlBoxes& boxes, GeneratorForm form) {
    if (!(kappa < 1.0) || kappa == 0.0) throw DomainError("generator_power: invalid kappa");
    GeneratorValue out;
    out.controls = argmin_theta_power(in, lc, kappa, boxes.portfolio);
    const double eta = lc.premium_ratio, lam = lc.hazard;
    const auto frac = optimal_fractions_power(in.y, kappa, lam, eta, boxes);
    out.controls.consumption = frac.xi;
    out.controls.premium = frac.zeta;
    out.controls.hazard_clamped = frac.hazard_clamped;

    const double a = 1.0 - kappa;
    const double ey = std::exp(-in.y / a);
    double zpsi = 0.0;  // sum over regular slots of (z_i + psi_i)^2
    for (int i = 0; i < 3; ++i)
        if (!lc.degenerate[i]) zpsi += (in.z[i] + lc.psi[i]) * (in.z[i] + lc.psi[i]);
    const double ratio = eta / lam;

    switch (form) {
        case GeneratorForm::inf_form: {
            bool sat = false;
            out.value = kappa * power_drift_objective(in, lc, kappa, out.controls.controls(), &sat);
            out.controls.saturated = out.controls.saturated || sat;
            break;
        }
        case GeneratorForm::closed_form: {
            const double xi_part = (1.0 / kappa - 1.0) * ey;
            const double zeta_part =
                ey * ((lam / kappa) * std::pow(ratio, -kappa / a) - eta * std::pow(ratio, -1.0 / a)) + eta;
            out.value = kappa * (xi_part + zeta_part - (lc.discount + lam) / kappa + lc.r -
                                 out.controls.minimand_value + zpsi / (2.0 * a) +
                                 sum_sq(in.z) / (2.0 * kappa));
            break;
        }
        case GeneratorForm::printed_literal: {
            // Braced expression of the display evaluated at the computed optimal pi.
            const Vec3& pi = out.controls.portfolio;
            const Vec3 u = LocalCoefficients::slots(pi);
            double braced = 0.0;
            for (int i = 0; i < 3; ++i) {
                const double d = u[i] * lc.scale[i] + (in.z[i] + lc.psi[i]) / (kappa - 1.0);
                braced += 0.5 * (kappa - 1.0) * d * d;
            }
            for (std::size_t j = 0; j < lc.atoms(); ++j) {
                const double g = lc.jump_exposure(pi, j);
                const double ups = in.upsilon[j];
                braced += lc.weights[j] *
                          (std::pow(1.0 + g, kappa) * std::exp(kappa * ups) - 1.0 - kappa * g - ups);
            }
            const double z3 = in.z[2];
            out.value = ((1.0 + lam * std::pow(ratio, -kappa / a)) / kappa -
                         (1.0 + eta * std::pow(ratio, -1.0 / a))) *
                            ey -
                        (lc.discount + lam) / kappa + lc.r + braced - zpsi / (2.0 * (kappa - 1.0)) +
                        (in.z[0] * in.z[0] + in.z[1] * in.z[1] + z3 * z3 * z3) / kappa;
            break;
        }
    }
    return out;
}

namespace {

struct PortfolioCache {
    bool valid = false;
    UtilitySpec utility;
    Box3 box{};
    LocalCoefficients lc;
    Vec3 z{};
    std::vector<double> upsilon;
    Vec3 portfolio{};

    bool matches(const UtilitySpec& u, const Box3& b, const LocalCoefficients& c,
                 const GeneratorInputs& in) const {
        if (!valid || z != in.z || !(utility == u) || box != b) return false;
        if (!std::equal(upsilon.begin(), upsilon.end(), in.upsilon.begin(), in.upsilon.end())) return false;
        return lc.t == c.t && lc.r == c.r && lc.scale == c.scale && lc.net_excess == c.net_excess &&
               lc.psi == c.psi && lc.degenerate == c.degenerate && lc.weights == c.weights &&
               lc.gamma_hat == c.gamma_hat;
    }
    void store(const UtilitySpec& u, const Box3& b, const LocalCoefficients& c, const GeneratorInputs& in,
               const Vec3& p) {
        valid = true;
        utility = u;
        box = b;
        lc = c;
        z = in.z;
        upsilon.assign(in.upsilon.begin(), in.upsilon.end());
        portfolio = p;
    }
};

}  // namespace

GeneratorValue generator(const UtilitySpec& utility, const GeneratorInputs& in,
                         const LocalCoefficients& lc, const ControlBoxes& boxes, GeneratorForm form) {
    if (utility.kind == UtilitySpec::Kind::exponential)
        return generator_exponential(in, lc, utility.delta, boxes, form);
    return generator_power(in, lc, utility.kappa, boxes, form);
}

StrategyRule optimal_strategy(const UtilitySpec& utility, const ControlBoxes& boxes) {
    utility.validate();
    StrategyRule rule;
    rule.boxes = boxes;
    rule.mode = utility.kind == UtilitySpec::Kind::exponential ? ControlMode::absolute
                                                               : ControlMode::fractional;
    rule.label = "optimal";
    rule.rule = [utility, boxes](const ControlState& s) {
        if (!s.coeffs) throw DomainError("optimal_strategy: state carries no coefficients");
        const LocalCoefficients& lc = *s.coeffs;
        GeneratorInputs in{s.t, s.x, s.y, s.z, s.upsilon};
        // The portfolio argmin depends on neither x nor y, so with a deterministic solution
        // every path repeats the same solve at a given node; each node keeps its last one. The
        // cache outlives the rule, so the key includes the utility and the box.
        thread_local std::vector<PortfolioCache> per_node;
        if (per_node.size() <= s.node) per_node.resize(s.node + 1);
        PortfolioCache& cache = per_node[s.node];
        const bool exponential = utility.kind == UtilitySpec::Kind::exponential;
        if (!cache.matches(utility, boxes.portfolio, lc, in)) {
            const auto opt = exponential ? argmin_theta_exponential(in, lc, utility.delta, boxes.portfolio)
                                         : argmin_theta_power(in, lc, utility.kappa, boxes.portfolio);
            cache.store(utility, boxes.portfolio, lc, in, opt.portfolio);
        }
        Controls u;
        u.portfolio = cache.portfolio;
        if (exponential) {
            u.consumption = optimal_consumption_exponential(s.x, s.y, utility.delta, boxes.consumption);
            u.premium = optimal_premium_exponential(s.y, utility.delta, lc.hazard, lc.premium_ratio,
                                                    boxes.premium).value;
        } else {
            const auto f = optimal_fractions_power(s.y, utility.kappa, lc.hazard, lc.premium_ratio, boxes);
            u.consumption = f.xi;
            u.premium = f.zeta;
        }
        return u;
    };
    return rule;
}

}  // namespace icins
