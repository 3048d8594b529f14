#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rclab {

/// Counter-based random numbers. Every draw is a pure function of its key,
/// so any (path, step, component) increment can be regenerated bit-exactly
/// without touching generator state, and parallel workers need no
/// coordination.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2)));
}

/// Uniform in (0, 1]; never returns 0 so log() is safe.
inline double uniform_unit(std::uint64_t key) {
    return static_cast<double>((key >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two decorrelated sub-keys.
inline double standard_normal(std::uint64_t key) {
    const double u1 = uniform_unit(splitmix64(key));
    const double u2 = uniform_unit(splitmix64(key ^ 0xD1B54A32D192ED03ull));
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

/// Keyed standard normal for noise increment component `comp` of master step
/// `step` on path `path`.
inline double path_normal(std::uint64_t seed, std::uint64_t path,
                          std::uint64_t step, std::uint64_t comp) {
    std::uint64_t k = mix(seed, 0x5AFE5EEDull);
    k = mix(k, path);
    k = mix(k, step);
    k = mix(k, comp);
    return standard_normal(k);
}

}  // namespace rng

/// Small sequential stream for test data and sampling (simplex draws,
/// random controls). Deterministic for a fixed seed.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : state_(rng::splitmix64(seed)) {}

    double uniform() { return rng::uniform_unit(next()); }

    /// Uniform on [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double normal() { return rng::standard_normal(next()); }

    /// Uniform integer in [0, n).
    int uniform_int(int n) {
        return static_cast<int>(next() % static_cast<std::uint64_t>(n));
    }

private:
    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ull;
        return rng::splitmix64(state_);
    }
    std::uint64_t state_;
};

}  // namespace rclab
