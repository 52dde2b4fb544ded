#pragma once

#include <array>

#include <Eigen/Dense>

#include "icins/coefficients.hpp"
#include "icins/path_engine.hpp"

namespace icins {

/// Smooth convex function of three variables. value() returns +infinity outside its domain,
/// which the line search treats as a barrier.
class Objective3 {
public:
    virtual ~Objective3() = default;
    virtual double value(const Vec3& x) const = 0;
    virtual void derivatives(const Vec3& x, Eigen::Vector3d& gradient,
                             Eigen::Matrix3d& hessian) const = 0;
};

struct NewtonSettings {
    double gradient_tolerance = 1e-10;
    int max_iterations = 100;
    double armijo = 1e-4;
    double backtrack = 0.5;
    int max_backtracks = 60;
};

struct NewtonResult {
    Vec3 x{};
    double value = 0.0;
    double projected_gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

using Box3 = std::array<Interval, 3>;

/// Projected damped Newton (active-set Newton on free coordinates, Armijo search along the
/// projection arc). Starts from the projection of `start`; starting at the projection of 0
/// gives the smallest-norm minimizer along flat directions.
NewtonResult minimize_on_box(const Objective3& f, const Box3& box, const NewtonSettings& settings = {},
                             const Vec3& start = {0.0, 0.0, 0.0});

/// Norm of the projected gradient, the first-order optimality measure on a box.
double projected_gradient_norm(const Vec3& x, const Eigen::Vector3d& g, const Box3& box);

}  // namespace icins
