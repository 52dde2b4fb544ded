#include "icins/stats.hpp"

#include <vector>

namespace icins {

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 16) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

MeanSe mean_and_se(std::span<const double> v) {
    MeanSe out;
    out.n = v.size();
    if (v.empty()) return out;
    out.mean = pairwise_sum(v) / static_cast<double>(v.size());
    if (v.size() < 2) return out;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - out.mean) * (v[i] - out.mean);
    const double var = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
    out.sd = std::sqrt(var);
    out.standard_error = out.sd / std::sqrt(static_cast<double>(v.size()));
    return out;
}

}  // namespace icins
