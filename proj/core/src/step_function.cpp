#include "icins/step_function.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "icins/error.hpp"

namespace icins {

namespace {

void check_knots(const std::vector<double>& knots, const char* what) {
    if (knots.empty()) throw DomainError(std::string(what) + ": knot list is empty");
    if (knots.front() != 0.0) throw DomainError(std::string(what) + ": first knot must be 0");
    for (std::size_t i = 1; i < knots.size(); ++i) {
        if (!(knots[i] > knots[i - 1]))
            throw DomainError(std::string(what) + ": knots must be strictly increasing");
    }
}

void check_finite(const std::vector<double>& values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) throw DomainError(std::string(what) + ": non-finite value");
    }
}

}  // namespace

StepFunction::StepFunction(double constant) : knots_{0.0}, values_{constant} {
    check_finite(values_, "StepFunction");
}

StepFunction::StepFunction(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
    check_knots(knots_, "StepFunction");
    if (values_.size() != knots_.size())
        throw DomainError("StepFunction: need one value per knot");
    check_finite(values_, "StepFunction");
}

std::size_t StepFunction::piece(double t) const {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.begin()) return 0;
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
}

double StepFunction::operator()(double t) const { return values_[piece(t)]; }

double StepFunction::integral(double a, double b) const {
    if (b < a) return -integral(b, a);
    if (a == b) return 0.0;
    double total = 0.0;
    // Everything left of 0 reads the first piece.
    if (a < 0.0) {
        total += values_[0] * (std::min(b, 0.0) - a);
        a = 0.0;
        if (b <= 0.0) return total;
    }
    std::size_t k = piece(a);
    double left = a;
    while (left < b) {
        const double right = (k + 1 < knots_.size()) ? std::min(b, knots_[k + 1]) : b;
        total += values_[k] * (right - left);
        left = right;
        ++k;
    }
    return total;
}

double StepFunction::sup_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

double StepFunction::inf() const { return *std::min_element(values_.begin(), values_.end()); }
double StepFunction::sup() const { return *std::max_element(values_.begin(), values_.end()); }

bool StepFunction::is_zero() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

StepSurface::StepSurface(double constant)
    : time_knots_{0.0}, maturity_knots_{0.0}, values_{constant} {
    check_finite(values_, "StepSurface");
}

StepSurface::StepSurface(std::vector<double> time_knots, std::vector<double> maturity_knots,
                         std::vector<double> values)
    : time_knots_(std::move(time_knots)),
      maturity_knots_(std::move(maturity_knots)),
      values_(std::move(values)) {
    check_knots(time_knots_, "StepSurface time");
    check_knots(maturity_knots_, "StepSurface maturity");
    if (values_.size() != time_knots_.size() * maturity_knots_.size())
        throw DomainError("StepSurface: values must have time_knots x maturity_knots entries");
    check_finite(values_, "StepSurface");
}

std::size_t StepSurface::time_piece(double t) const {
    auto it = std::upper_bound(time_knots_.begin(), time_knots_.end(), t);
    return it == time_knots_.begin() ? 0 : static_cast<std::size_t>(it - time_knots_.begin()) - 1;
}

std::size_t StepSurface::maturity_piece(double s) const {
    auto it = std::upper_bound(maturity_knots_.begin(), maturity_knots_.end(), s);
    return it == maturity_knots_.begin() ? 0
                                         : static_cast<std::size_t>(it - maturity_knots_.begin()) - 1;
}

double StepSurface::operator()(double t, double s) const {
    return values_[time_piece(t) * maturity_knots_.size() + maturity_piece(s)];
}

StepFunction StepSurface::maturity_slice(std::size_t tp) const {
    const auto m = maturity_knots_.size();
    std::vector<double> row(values_.begin() + static_cast<std::ptrdiff_t>(tp * m),
                            values_.begin() + static_cast<std::ptrdiff_t>((tp + 1) * m));
    return StepFunction(maturity_knots_, std::move(row));
}

StepFunction StepSurface::time_slice(std::size_t mp) const {
    const auto m = maturity_knots_.size();
    std::vector<double> col(time_knots_.size());
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = values_[i * m + mp];
    return StepFunction(time_knots_, std::move(col));
}

double StepSurface::integral_maturity(double t, double s0, double s1) const {
    return maturity_slice(time_piece(t)).integral(s0, s1);
}

double StepSurface::integral_time(double s, double t0, double t1) const {
    return time_slice(maturity_piece(s)).integral(t0, t1);
}

bool StepSurface::vanishes_up_to_maturity(double s_max) const {
    const auto m = maturity_knots_.size();
    for (std::size_t tp = 0; tp < time_knots_.size(); ++tp) {
        // A piece that starts exactly at s_max touches a single maturity; ignore it.
        for (std::size_t mp = 0; mp < m && maturity_knots_[mp] < s_max; ++mp) {
            if (values_[tp * m + mp] != 0.0) return false;
        }
    }
    return true;
}

double StepSurface::sup_abs() const {
    double r = 0.0;
    for (double v : values_) r = std::max(r, std::abs(v));
    return r;
}

bool StepSurface::is_zero() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

}  // namespace icins
