#pragma once

#include <cstdint>
#include <limits>

namespace icins {

/// SplitMix64 as a UniformRandomBitGenerator.
///
/// Streams are keyed by (seed, path, tag) so every path draws the same numbers no matter
/// which thread simulates it or in what order.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t path, std::uint64_t tag)
        : state_(mix(mix(seed ^ 0x6a09e667f3bcc909ULL) ^ mix(path + 0x3c6ef372fe94f82bULL) ^
                     mix(tag * 0x9e3779b97f4a7c15ULL + 0xa54ff53a5f1d36f1ULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

}  // namespace icins
