#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

namespace meshmac {

/// Named deterministic random stream.
///
/// Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
/// implements the bounded draws itself, because the standard distributions are
/// implementation-defined and would break bit-exact replay across toolchains.
class Rng {
public:
    /// Well-known stream identifiers. Per-node streams are `kNodeBase + id`.
    enum Stream : std::uint64_t {
        kPlacement = 1,
        kTrafficPhase = 2,
        kNodeBase = 1'000,
    };

    Rng(std::uint64_t seed, std::uint64_t stream) : engine_(mix(mix(seed) ^ mix(~stream))) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [lo, hi], inclusive; rejection sampling, no modulo bias.
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
        if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
        const std::uint64_t span = hi - lo;
        if (span == UINT64_MAX) return next();
        const std::uint64_t range = span + 1;
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range);
        std::uint64_t draw = next();
        while (draw >= limit) draw = next();
        return lo + draw % range;
    }

    /// Uniform double in [0, 1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        // splitmix64 finalizer
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace meshmac
