#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace heatcast {

/// SplitMix64 finalizer; good avalanche, used for both hashing and stream keys.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Fold extra words into a seed (order-sensitive). Used to derive stream and
/// per-trial seeds from one master seed.
inline uint64_t seed_fold(uint64_t seed, uint64_t a) { return mix64(seed ^ mix64(a)); }
inline uint64_t seed_fold(uint64_t seed, uint64_t a, uint64_t b) { return seed_fold(seed_fold(seed, a), b); }
inline uint64_t seed_fold(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) { return seed_fold(seed_fold(seed, a, b), c); }

// Stream tags so independent consumers of the same master seed never collide.
namespace rng_stream {
constexpr uint64_t precursor = 0x01;
constexpr uint64_t regional_noise = 0x02;
constexpr uint64_t field_noise_ts = 0x03;
constexpr uint64_t field_noise_zg = 0x04;
constexpr uint64_t split = 0x10;
constexpr uint64_t undersample = 0x11;
constexpr uint64_t init = 0x12;
constexpr uint64_t shuffle = 0x13;
constexpr uint64_t dropout = 0x14;
}  // namespace rng_stream

/// Counter-based SplitMix64 generator. A stream is fully determined by
/// (seed, stream id), so per-(variable, year) generation parallelizes with a
/// byte-identical result regardless of worker count. Gaussian draws use
/// Box-Muller on our own uniforms rather than std::normal_distribution, whose
/// output is not specified across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed, uint64_t stream = 0)
        : state_(seed_fold(seed, stream)) {}

    uint64_t next_u64() { return mix64(state_++); }

    /// Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1); safe as a log() argument.
    double uniform_open() { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Lemire multiply-shift; deterministic.
    uint64_t below(uint64_t n) {
        return uint64_t((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    /// Standard normal draw (Box-Muller, second value cached).
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_open()));
        const double a = 2.0 * M_PI * uniform();
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace heatcast
