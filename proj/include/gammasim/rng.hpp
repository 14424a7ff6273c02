#pragma once

#include <cstdint>

namespace gammasim {

// splitmix64: tiny, seedable, fully reproducible across platforms. Every
// stochastic feature derives its streams from one master instance of this.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // [0, 1), 53-bit resolution
    double uniform01() { return double(next() >> 11) * 0x1.0p-53; }

    // [-1, 1)
    double uniform_pm1() { return 2.0 * uniform01() - 1.0; }
};

}  // namespace gammasim
