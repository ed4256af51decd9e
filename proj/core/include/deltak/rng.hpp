#pragma once

#include <cmath>
#include <cstdint>

namespace deltak {

// splitmix64. Chosen over <random> engines so every stream is bit-identical
// across standard library implementations; all randomness in the project
// flows through this.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // standard normal, Box-Muller on fresh uniforms (no cached spare, so the
    // stream position is always two words per draw)
    double next_gaussian() {
        constexpr double two_pi = 6.283185307179586476925286766559;
        const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }
};

// Derives independent substreams from a base seed. Tags keep the embedding
// table, latent init, model weights and Monte Carlo trials from colliding.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    SplitMix64 s(a + 0x632BE59BD9B4E019ULL * (b + 1));
    s.next();
    return s.next();
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

inline constexpr std::uint64_t kTagEmbed = 0xE3B0C44298FC1C14ULL;
inline constexpr std::uint64_t kTagLatent = 0xAF1349B9F5F9A1A6ULL;
inline constexpr std::uint64_t kTagWeight = 0x84D89877F0D4AE8CULL;
inline constexpr std::uint64_t kTagTrial = 0x2C26B46B68FFC68FULL;
inline constexpr std::uint64_t kTagInstance = 0x12207109870A31C5ULL;

}  // namespace deltak
