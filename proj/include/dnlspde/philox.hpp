#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Any output is a
// pure function of (key, counter), so a Brownian increment can be recomputed
// in isolation and path-level parallelism never changes results.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace dnlspde {

class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept {
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            ctr = round(ctr, key);
        }
        return ctr;
    }

    static Key key_from(std::uint64_t seed) noexcept {
        return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;

    static Counter round(const Counter& c, const Key& k) noexcept {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Uniform in the open interval (0, 1) from the top 52 of 64 random bits.
inline double uniform_open(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Standard normal variate number `index` of stream `stream` under `seed`
/// (Box-Muller, cosine branch).
inline double counter_normal(std::uint64_t seed, std::uint64_t index, std::uint32_t stream = 0) noexcept {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index),
                                  static_cast<std::uint32_t>(index >> 32), stream, 0u};
    const auto out = Philox4x32::generate(ctr, Philox4x32::key_from(seed));
    const double u1 = uniform_open((static_cast<std::uint64_t>(out[0]) << 32) | out[1]);
    const double u2 = uniform_open((static_cast<std::uint64_t>(out[2]) << 32) | out[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace dnlspde
