#pragma once

#include <array>
#include <cstdint>

namespace arbiter::rng {

/// splitmix64 step. Used for seeding and stable per-item stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Stable hash of (seed, index). Parallel workers derive per-item seeds from
/// this, so scheduling never changes sampled output.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ull * (index + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

/**
 * Generator — xoshiro256++ with hand-rolled distributions.
 *
 * The C++ standard library leaves <random> distribution algorithms
 * implementation-defined, so sequences would differ between standard
 * libraries. Everything downstream (scene sampling, training, reports)
 * must be reproducible bit-for-bit from a seed, hence this self-contained
 * generator with fixed distribution algorithms.
 */
class Generator {
public:
    explicit Generator(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [a, b).
    double uniform(double a, double b) { return a + uniform() * (b - a); }

    /// Uniform integer in [lo, hi], inclusive, via rejection on the top range.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Standard normal via Box-Muller (pairs cached).
    double normal();

    /// Gamma(shape, 1) via Marsaglia-Tsang, with the alpha < 1 boost.
    double gamma(double shape);

    /// Beta(a, b) from two gamma draws.
    double beta(double a, double b);

    /// Poisson(lambda) via Knuth's product method. Requires lambda < 700.
    int poisson(double lambda);

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

} // namespace arbiter::rng
