#pragma once

#include <cstddef>
#include <vector>

namespace icins {

/// Right-continuous piecewise-constant function on [0, inf).
///
/// Piece k holds `values[k]` on [knots[k], knots[k+1]); the last piece extends to
/// infinity. knots[0] must be 0. Arguments below 0 read the first piece.
class StepFunction {
public:
    StepFunction() : StepFunction(0.0) {}
    explicit StepFunction(double constant);
    StepFunction(std::vector<double> knots, std::vector<double> values);

    double operator()(double t) const;

    /// Exact integral over [a, b]; returns minus the integral over [b, a] when b < a.
    double integral(double a, double b) const;

    double sup_abs() const;
    double inf() const;
    double sup() const;
    bool is_constant() const noexcept { return values_.size() == 1; }
    bool is_zero() const;

    const std::vector<double>& knots() const noexcept { return knots_; }
    const std::vector<double>& values() const noexcept { return values_; }

    friend bool operator==(const StepFunction&, const StepFunction&) = default;

private:
    std::size_t piece(double t) const;

    std::vector<double> knots_;
    std::vector<double> values_;
};

/// Piecewise-constant function of (time t, maturity s), row-major over time pieces.
///
/// Used for the HJM coefficient tables alpha(t,s), sigma(t,s), gamma(t,s,z).
class StepSurface {
public:
    StepSurface() : StepSurface(0.0) {}
    explicit StepSurface(double constant);
    StepSurface(std::vector<double> time_knots, std::vector<double> maturity_knots,
                std::vector<double> values);

    double operator()(double t, double s) const;

    /// Exact integral of s -> f(t, s) over [s0, s1].
    double integral_maturity(double t, double s0, double s1) const;

    /// Exact integral of u -> f(u, s) over [t0, t1].
    double integral_time(double s, double t0, double t1) const;

    /// True when f(t, s) == 0 for every t and every s in [0, s_max].
    bool vanishes_up_to_maturity(double s_max) const;

    double sup_abs() const;
    bool is_zero() const;

    const std::vector<double>& time_knots() const noexcept { return time_knots_; }
    const std::vector<double>& maturity_knots() const noexcept { return maturity_knots_; }
    const std::vector<double>& values() const noexcept { return values_; }

    friend bool operator==(const StepSurface&, const StepSurface&) = default;

private:
    StepFunction maturity_slice(std::size_t time_piece) const;
    StepFunction time_slice(std::size_t maturity_piece) const;
    std::size_t time_piece(double t) const;
    std::size_t maturity_piece(double s) const;

    std::vector<double> time_knots_;
    std::vector<double> maturity_knots_;
    std::vector<double> values_;
};

}  // namespace icins
