#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace icins {

/// Pairwise (cascade) summation; the result depends only on the order of the input.
double pairwise_sum(std::span<const double> v);

struct MeanSe {
    double mean = 0.0;
    double standard_error = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
};

MeanSe mean_and_se(std::span<const double> v);

}  // namespace icins
