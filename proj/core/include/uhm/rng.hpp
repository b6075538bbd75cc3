#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace uhm {

/// Counter-based deterministic random stream.
///
/// Each draw hashes (key, counter) with a SplitMix64-style finalizer and
/// advances the counter; substreams are derived by folding labels into the
/// key.  Output is identical across platforms and independent of call
/// interleaving between distinct streams, which is what makes per-(method,
/// seed) cells reorderable.
class Rng {
public:
    explicit Rng(std::uint64_t key) : key_(key) {}

    /// Derives an independent stream by mixing a label into the key.
    [[nodiscard]] Rng split(std::uint64_t label) const {
        return Rng(mix(key_ ^ 0x9e3779b97f4a7c15ULL, label));
    }
    [[nodiscard]] Rng split(std::string_view label) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
        for (unsigned char c : label) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return split(h);
    }

    std::uint64_t next_u64() { return mix(key_, counter_++); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (two uniforms per call, no caching,
    /// so the stream position is input-independent).
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        // Guard against log(0).
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    /// Index in [0, n) .
    std::size_t index(std::size_t n) {
        // 64-bit draw modulo-reduced via 128-bit multiply (unbiased enough
        // for n << 2^64 and bit-reproducible).
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

private:
    static std::uint64_t mix(std::uint64_t key, std::uint64_t ctr) {
        std::uint64_t z = key + 0x9e3779b97f4a7c15ULL * (ctr + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace uhm
