#pragma once

#include <cstdint>

namespace appraiser {

// SplitMix64 finalizer. Full-avalanche mix used both as the stream step and
// for deriving substream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic counter-based RNG. Campaigns derive one independent stream
// per (repetition, image) so task execution order never affects results.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    // Unbiased draw in [0, bound) via rejection sampling. bound must be > 0.
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    double next_unit() {  // [0, 1) with 53 random bits
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t lane0,
                                        std::uint64_t lane1 = 0) {
    std::uint64_t h = mix64(seed ^ 0xa0761d6478bd642fULL);
    h = mix64(h ^ (lane0 + 0x9e3779b97f4a7c15ULL));
    h = mix64(h ^ (lane1 + 0xe7037ed1a0b428dbULL));
    return h;
}

}  // namespace appraiser
