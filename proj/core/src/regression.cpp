#include "icins/regression.hpp"

#include <cmath>

#include "icins/error.hpp"

namespace icins {

void RegressionSpec::validate() const {
    if (degree < 0) throw DomainError("regression: degree must be >= 0");
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw DomainError("regression: ridge must be >= 0");
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& states) {
    const auto n = states.rows();
    const auto d = static_cast<std::size_t>(states.cols());
    Standardizer s;
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 1.0);
    s.active.assign(d, false);
    if (n == 0) return s;
    for (std::size_t k = 0; k < d; ++k) {
        const auto col = states.col(static_cast<Eigen::Index>(k));
        const double m = col.mean();
        const double sd = std::sqrt((col.array() - m).square().mean());
        s.mean[k] = m;
        // Spread below roundoff relative to the level is treated as none.
        if (sd > 1e-12 * std::max(1.0, std::abs(m))) {
            s.scale[k] = sd;
            s.active[k] = true;
        }
    }
    return s;
}

std::size_t Standardizer::active_dimension() const noexcept {
    std::size_t n = 0;
    for (bool a : active) n += a ? 1 : 0;
    return n;
}

namespace {

void enumerate(std::size_t dim, int remaining, std::vector<int>& current, std::size_t k,
               std::vector<std::vector<int>>& out) {
    if (k == dim) {
        out.push_back(current);
        return;
    }
    for (int e = 0; e <= remaining; ++e) {
        current[k] = e;
        enumerate(dim, remaining - e, current, k + 1, out);
    }
    current[k] = 0;
}

}  // namespace

PolynomialBasis::PolynomialBasis(std::size_t dimension, int degree) : dimension_(dimension) {
    if (degree < 0) throw DomainError("PolynomialBasis: degree must be >= 0");
    std::vector<int> current(dimension, 0);
    std::vector<std::vector<int>> all;
    enumerate(dimension, degree, current, 0, all);
    // Order by total degree so the constant comes first.
    for (int total = 0; total <= degree; ++total)
        for (const auto& e : all) {
            int s = 0;
            for (int v : e) s += v;
            if (s == total) exponents_.push_back(e);
        }
}

void PolynomialBasis::evaluate(const double* z, double* out) const {
    for (std::size_t b = 0; b < exponents_.size(); ++b) {
        double v = 1.0;
        for (std::size_t k = 0; k < dimension_; ++k)
            for (int e = 0; e < exponents_[b][k]; ++e) v *= z[k];
        out[b] = v;
    }
}

RegressionFit::RegressionFit(Standardizer standardizer, int degree, Eigen::MatrixXd coefficients,
                             bool degenerate)
    : standardizer_(std::move(standardizer)),
      basis_(standardizer_.active_dimension(), degree),
      coef_(std::move(coefficients)),
      degenerate_(degenerate) {
    if (static_cast<std::size_t>(coef_.rows()) != basis_.size())
        throw DomainError("RegressionFit: coefficient rows do not match the basis");
}

void RegressionFit::features(const double* state, double* scratch) const {
    double z[16];
    const std::size_t da = basis_.dimension();
    if (da > 16) throw DomainError("RegressionFit: at most 16 active state dimensions");
    std::size_t j = 0;
    for (std::size_t k = 0; k < standardizer_.dimension(); ++k)
        if (standardizer_.active[k]) z[j++] = (state[k] - standardizer_.mean[k]) / standardizer_.scale[k];
    basis_.evaluate(z, scratch);
}

double RegressionFit::evaluate(const double* state, std::size_t target) const {
    double phi[64];
    if (basis_.size() > 64) {
        std::vector<double> big(basis_.size());
        features(state, big.data());
        double s = 0.0;
        for (std::size_t b = 0; b < big.size(); ++b) s += big[b] * coef_(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(target));
        return s;
    }
    features(state, phi);
    double s = 0.0;
    for (std::size_t b = 0; b < basis_.size(); ++b)
        s += phi[b] * coef_(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(target));
    return s;
}

void RegressionFit::evaluate_all(const double* state, double* out) const {
    std::vector<double> phi(basis_.size());
    features(state, phi.data());
    for (std::size_t t = 0; t < targets(); ++t) {
        double s = 0.0;
        for (std::size_t b = 0; b < phi.size(); ++b)
            s += phi[b] * coef_(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(t));
        out[t] = s;
    }
}

RegressionFit RegressionFit::constant(std::size_t dimension, std::size_t targets, double value) {
    Standardizer s;
    s.mean.assign(dimension, 0.0);
    s.scale.assign(dimension, 1.0);
    s.active.assign(dimension, false);
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(targets));
    coef.setConstant(value);
    return RegressionFit(std::move(s), 0, std::move(coef), false);
}

LeastSquaresProjector::LeastSquaresProjector(const Eigen::MatrixXd& states,
                                             const RegressionSpec& spec, const Standardizer* fixed)
    : spec_(spec) {
    spec.validate();
    standardizer_ = fixed ? *fixed : Standardizer::fit(states);
    if (standardizer_.dimension() != static_cast<std::size_t>(states.cols()))
        throw DomainError("regression: standardizer dimension does not match the states");

    const PolynomialBasis basis(standardizer_.active_dimension(), spec.degree);
    const auto n = states.rows();
    const auto m = static_cast<Eigen::Index>(basis.size());
    if (n < m) throw DomainError("regression: fewer samples than basis functions");

    design_.resize(n, m);
    const RegressionFit probe(standardizer_, spec.degree, Eigen::MatrixXd::Zero(m, 1), false);
    std::vector<double> row(static_cast<std::size_t>(m));
    std::vector<double> st(static_cast<std::size_t>(states.cols()));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < states.cols(); ++k) st[static_cast<std::size_t>(k)] = states(i, k);
        probe.features(st.data(), row.data());
        for (Eigen::Index b = 0; b < m; ++b) design_(i, b) = row[static_cast<std::size_t>(b)];
    }

    // Ridge as extra rows, leaving the intercept free; QR avoids squaring the condition number.
    ridge_rows_ = spec.ridge > 0.0 ? m - 1 : 0;
    Eigen::MatrixXd A(n + ridge_rows_, m);
    A.topRows(n) = design_;
    if (ridge_rows_ > 0) {
        A.bottomRows(ridge_rows_).setZero();
        ridge_weight_ = std::sqrt(spec.ridge * static_cast<double>(n));
        for (Eigen::Index b = 1; b < m; ++b) A(n + b - 1, b) = ridge_weight_;
    }
    qr_.setThreshold(1e-12);
    qr_.compute(A);
    degenerate_ = qr_.rank() < m;
    if (degenerate_) {
        cod_.setThreshold(1e-12);
        cod_.compute(A);
    }
}

RegressionFit LeastSquaresProjector::fit(const Eigen::MatrixXd& targets) const {
    const auto n = design_.rows();
    if (targets.rows() != n)
        throw DomainError("regression: states and targets have different sample counts");
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n + ridge_rows_, targets.cols());
    B.topRows(n) = targets;
    Eigen::MatrixXd coef = degenerate_ ? Eigen::MatrixXd(cod_.solve(B)) : Eigen::MatrixXd(qr_.solve(B));
    if (!coef.allFinite()) throw NumericalError("regression: non-finite coefficients");
    return RegressionFit(standardizer_, spec_.degree, std::move(coef), degenerate_);
}

Eigen::VectorXd LeastSquaresProjector::fitted(const RegressionFit& fit, std::size_t target) const {
    return design_ * fit.coefficients().col(static_cast<Eigen::Index>(target));
}

RegressionFit regression_conditional_expectation(const Eigen::MatrixXd& states,
                                                 const Eigen::MatrixXd& targets,
                                                 const RegressionSpec& spec,
                                                 const Standardizer* fixed) {
    return LeastSquaresProjector(states, spec, fixed).fit(targets);
}

}  // namespace icins
