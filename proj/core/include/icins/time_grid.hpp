#pragma once

#include <cstddef>

#include "icins/error.hpp"

namespace icins {

/// Uniform grid t_i = i * T / N, i = 0..N.
struct TimeGrid {
    double horizon = 1.0;
    std::size_t steps = 1;

    TimeGrid() = default;
    TimeGrid(double T, std::size_t N) : horizon(T), steps(N) {
        if (!(T > 0.0)) throw DomainError("TimeGrid: horizon must be positive");
        if (N == 0) throw DomainError("TimeGrid: need at least one step");
    }

    double dt() const noexcept { return horizon / static_cast<double>(steps); }
    double time(std::size_t i) const noexcept {
        return i == steps ? horizon : horizon * static_cast<double>(i) / static_cast<double>(steps);
    }
    std::size_t nodes() const noexcept { return steps + 1; }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

}  // namespace icins
