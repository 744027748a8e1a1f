#pragma once

#include <cstdint>

namespace basincert {

// splitmix64. Used instead of <random> engines/distributions so that
// seeded outputs are identical across standard-library implementations,
// which the byte-identical report requirement depends on.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53 random bits
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::uint64_t state_;
};

// Independent stream for (seed, index). Parallel sampling draws from
// per-index streams, so results do not depend on execution order.
inline SplitMix64 rng_stream(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 r(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)) ^ 0x6a09e667f3bcc909ULL);
    r.next();
    r.next();
    return r;
}

} // namespace basincert
