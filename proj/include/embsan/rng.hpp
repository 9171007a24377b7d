#pragma once

#include <cstdint>

namespace embsan {

// Counter-based deterministic randomness. Every consumer derives its own
// stream from (seed, domain tag, index), so generation order never matters
// and any sample can be regenerated in isolation.

constexpr uint64_t fnv1a64(const char* s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    while (*s) {
        h ^= static_cast<uint64_t>(static_cast<unsigned char>(*s++));
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t mix64(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 0x632be59bd9b4e019ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// SplitMix64 stream seeded by hashing (seed, stream, index) together.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(mix64(seed, 0)) {}
    Rng(uint64_t seed, uint64_t stream) : state_(mix64(seed, stream)) {}
    Rng(uint64_t seed, uint64_t stream, uint64_t index)
        : state_(mix64(mix64(seed, stream), index)) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform float in [lo, hi).
    float uniform_float(float lo, float hi) {
        return lo + static_cast<float>(uniform()) * (hi - lo);
    }

    /// Uniform integer in [0, n). n must be positive.
    uint64_t below(uint64_t n) { return next() % n; }

    /// Uniform integer in [lo, hi] inclusive.
    int range_int(int lo, int hi) {
        return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

private:
    uint64_t state_;
};

namespace streams {
constexpr uint64_t kSynthInterior = fnv1a64("synth.interior");
constexpr uint64_t kSynthInsert = fnv1a64("synth.insert");
constexpr uint64_t kSynthTargets = fnv1a64("synth.targets");
constexpr uint64_t kBenignSample = fnv1a64("benign.sample");
constexpr uint64_t kParamInit = fnv1a64("param.init");
constexpr uint64_t kGradCheck = fnv1a64("grad.check");
constexpr uint64_t kDistillMix = fnv1a64("distill.mix");
constexpr uint64_t kEvalProbe = fnv1a64("eval.probe");
} // namespace streams

} // namespace embsan
