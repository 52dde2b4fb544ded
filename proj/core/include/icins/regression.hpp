#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace icins {

struct RegressionSpec {
    int degree = 2;
    double ridge = 1e-8;  // scaled by the sample count; the intercept is not penalised
    void validate() const;
    friend bool operator==(const RegressionSpec&, const RegressionSpec&) = default;
};

/// Affine map of the state to zero mean and unit spread. Dimensions with no spread in the
/// sample are marked inactive and dropped from the basis.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;
    std::vector<bool> active;

    static Standardizer fit(const Eigen::MatrixXd& states);
    std::size_t dimension() const noexcept { return mean.size(); }
    std::size_t active_dimension() const noexcept;
};

/// Monomials of total degree <= degree in the active standardized coordinates,
/// constant term first.
class PolynomialBasis {
public:
    PolynomialBasis() = default;
    PolynomialBasis(std::size_t dimension, int degree);

    std::size_t size() const noexcept { return exponents_.size(); }
    std::size_t dimension() const noexcept { return dimension_; }
    const std::vector<std::vector<int>>& exponents() const noexcept { return exponents_; }
    /// Writes the basis at an already standardized point (length dimension()).
    void evaluate(const double* z, double* out) const;

private:
    std::size_t dimension_ = 0;
    std::vector<std::vector<int>> exponents_;
};

/// Least-squares fit of several targets on a shared polynomial basis of the state.
class RegressionFit {
public:
    RegressionFit() = default;
    RegressionFit(Standardizer standardizer, int degree, Eigen::MatrixXd coefficients,
                  bool degenerate);

    std::size_t targets() const noexcept { return static_cast<std::size_t>(coef_.cols()); }
    std::size_t basis_size() const noexcept { return basis_.size(); }
    const Eigen::MatrixXd& coefficients() const noexcept { return coef_; }
    Eigen::MatrixXd& coefficients() noexcept { return coef_; }
    const Standardizer& standardizer() const noexcept { return standardizer_; }
    const PolynomialBasis& basis() const noexcept { return basis_; }
    bool degenerate() const noexcept { return degenerate_; }

    /// Estimate of target k at a raw state (length = state dimension).
    double evaluate(const double* state, std::size_t target) const;
    void evaluate_all(const double* state, double* out) const;
    /// Basis row at a raw state (scratch must hold basis_size() entries).
    void features(const double* state, double* scratch) const;

    /// A fit that returns `value` for every target everywhere.
    static RegressionFit constant(std::size_t dimension, std::size_t targets, double value = 0.0);

private:
    Standardizer standardizer_;
    PolynomialBasis basis_;
    Eigen::MatrixXd coef_;  // basis_size x targets
    bool degenerate_ = false;
};

/// QR factorization of one design matrix, reusable for several target sets.
class LeastSquaresProjector {
public:
    LeastSquaresProjector(const Eigen::MatrixXd& states, const RegressionSpec& spec,
                          const Standardizer* fixed = nullptr);

    /// Fit of every column of `targets` (rows = sample count).
    RegressionFit fit(const Eigen::MatrixXd& targets) const;
    /// Fitted values at the samples for a single target.
    Eigen::VectorXd fitted(const RegressionFit& fit, std::size_t target) const;
    bool degenerate() const noexcept { return degenerate_; }
    const Standardizer& standardizer() const noexcept { return standardizer_; }
    Eigen::Index samples() const noexcept { return design_.rows(); }

private:
    RegressionSpec spec_;
    Standardizer standardizer_;
    Eigen::MatrixXd design_;
    Eigen::Index ridge_rows_ = 0;
    double ridge_weight_ = 0.0;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_;
    bool degenerate_ = false;
};

/// Regresses every column of `targets` (n x k) on the basis of `states` (n x d).
/// `fixed` pins the standardization, so fits from different samples share one basis.
/// Throws DomainError if n is smaller than the basis dimension.
RegressionFit regression_conditional_expectation(const Eigen::MatrixXd& states,
                                                 const Eigen::MatrixXd& targets,
                                                 const RegressionSpec& spec,
                                                 const Standardizer* fixed = nullptr);

}  // namespace icins
