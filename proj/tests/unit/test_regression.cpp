#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "icins/error.hpp"
#include "icins/regression.hpp"

namespace icins {
namespace {

Eigen::MatrixXd uniform_states(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.5, 2.5);
    Eigen::MatrixXd s(n, d);
    for (Eigen::Index i = 0; i < s.rows(); ++i)
        for (Eigen::Index j = 0; j < s.cols(); ++j) s(i, j) = u(rng);
    return s;
}

TEST(PolynomialBasis, TotalDegreeOrdering) {
    const PolynomialBasis b(2, 2);
    ASSERT_EQ(b.size(), 6u);
    EXPECT_EQ(b.exponents()[0], (std::vector<int>{0, 0}));
    const double z[2] = {2.0, 3.0};
    double out[6];
    b.evaluate(z, out);
    double sum = 0.0;
    for (double v : out) sum += v;
    EXPECT_DOUBLE_EQ(sum, 1 + 2 + 3 + 4 + 6 + 9);
}

TEST(Regression, RecoversPolynomialInTheSpanExactly) {
    const auto s = uniform_states(200, 2, 1);
    Eigen::MatrixXd y(200, 1);
    for (Eigen::Index i = 0; i < 200; ++i)
        y(i, 0) = 1.5 - 0.7 * s(i, 0) + 0.2 * s(i, 1) + 0.3 * s(i, 0) * s(i, 1) - 0.05 * s(i, 1) * s(i, 1);
    const auto fit = regression_conditional_expectation(s, y, RegressionSpec{2, 0.0});
    const double p[2] = {1.1, 2.2};
    EXPECT_NEAR(fit.evaluate(p, 0), 1.5 - 0.77 + 0.44 + 0.3 * 2.42 - 0.05 * 4.84, 1e-10);
    EXPECT_FALSE(fit.degenerate());
}

TEST(Regression, QuadraticCoefficientIsConsistentUnderNoise) {
    const std::size_t n = 10000;
    const auto s = uniform_states(n, 1, 2);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.3);
    Eigen::MatrixXd y(n, 1);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) y(i, 0) = s(i, 0) * s(i, 0) + noise(rng);
    const RegressionSpec spec{2, 0.0};
    const auto fit = regression_conditional_expectation(s, y, spec);
    // In standardized coordinates z = (x - m) / c the x^2 coefficient becomes c^2.
    const double c = fit.standardizer().scale[0];
    Eigen::MatrixXd design(n, 3);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) fit.features(&s(i, 0), &design(i, 0));
    const Eigen::MatrixXd cov = (design.transpose() * design).inverse();
    const double se = 0.3 * std::sqrt(cov(2, 2));
    EXPECT_LE(std::abs(fit.coefficients()(2, 0) / (c * c) - 1.0), 4.0 * se / (c * c));
}

TEST(Regression, ConstantTargetGivesConstantFit) {
    const auto s = uniform_states(100, 1, 4);
    const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(100, 1, 0.25);
    for (int degree : {0, 1, 3}) {
        const auto fit = regression_conditional_expectation(s, y, RegressionSpec{degree, 1e-8});
        for (double x : {0.7, 1.9, 2.4}) EXPECT_NEAR(fit.evaluate(&x, 0), 0.25, 1e-10) << degree;
    }
}

TEST(Regression, ConstantStateDropsToIntercept) {
    const Eigen::MatrixXd s = Eigen::MatrixXd::Constant(40, 1, 1.0);
    Eigen::MatrixXd y(40, 1);
    for (Eigen::Index i = 0; i < 40; ++i) y(i, 0) = static_cast<double>(i % 2);
    const auto fit = regression_conditional_expectation(s, y, RegressionSpec{});
    const double x = 1.0;
    EXPECT_NEAR(fit.evaluate(&x, 0), 0.5, 1e-9);
    EXPECT_EQ(fit.standardizer().active_dimension(), 0u);
}

TEST(Regression, TooFewSamplesThrows) {
    const auto s = uniform_states(3, 2, 5);
    EXPECT_THROW(regression_conditional_expectation(s, Eigen::MatrixXd::Zero(3, 1), RegressionSpec{2, 0.0}),
                 DomainError);
}

TEST(Regression, FixedStandardizerIsReused) {
    const auto a = uniform_states(50, 1, 6);
    const auto st = Standardizer::fit(a);
    const auto b = uniform_states(50, 1, 7);
    const LeastSquaresProjector proj(b, RegressionSpec{}, &st);
    EXPECT_EQ(proj.standardizer().mean, st.mean);
    EXPECT_EQ(proj.standardizer().scale, st.scale);
}

TEST(RegressionSpec, RejectsNegativeDegreeAndRidge) {
    EXPECT_THROW((RegressionSpec{-1, 0.0}.validate()), DomainError);
    EXPECT_THROW((RegressionSpec{2, -1.0}.validate()), DomainError);
}

}  // namespace
}  // namespace icins
