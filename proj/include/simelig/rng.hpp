#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace simelig {

// Self-contained RNG so that generated populations and assignments are a pure
// function of (seed, ids) independent of the standard library implementation.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stable 64-bit hash of a byte string (FNV-1a).
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64_u64(std::uint64_t v, std::uint64_t h) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (i * 8)) & 0xff;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Mixes a global seed with a stage or stream name. Every pipeline stage draws
/// from its own stream so inserting a stage never shifts another stage's draws.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stream) {
    std::uint64_t s = fnv1a64(stream, fnv1a64_u64(global_seed, 1469598103934665603ULL));
    return splitmix64(s);
}

/// Keyed hash for per-entity assignments (stable under record reordering).
inline std::uint64_t keyed_hash(std::uint64_t seed, std::uint64_t key) {
    std::uint64_t s = fnv1a64_u64(key, fnv1a64_u64(seed, 1469598103934665603ULL));
    return splitmix64(s);
}

inline std::uint64_t keyed_hash(std::uint64_t seed, std::string_view key) {
    std::uint64_t s = fnv1a64(key, fnv1a64_u64(seed, 1469598103934665603ULL));
    return splitmix64(s);
}

/// xoshiro256** stream generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0,1) with 53-bit resolution.
    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next() % span);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    /// Standard normal via the polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, q;
        do {
            u = 2.0 * u01() - 1.0;
            v = 2.0 * u01() - 1.0;
            q = u * u + v * v;
        } while (q >= 1.0 || q == 0.0);
        const double f = std::sqrt(-2.0 * std::log(q) / q);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    bool bernoulli(double p) { return u01() < p; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace simelig
