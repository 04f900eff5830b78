// SPDX-License-Identifier: Apache-2.0
//
// Counter-based 64-bit random generator.
//
// Output i of a stream is fin(key + (i+1)*GAMMA), where fin is the SplitMix64
// finalizer and the key is derived from a (seed, stream) pair:
//
//     key = fin(fin(seed ^ 0x8BADF00D5DEFACED) ^ fin(stream * GAMMA))
//
// Distinct (seed, stream) pairs give statistically independent streams, every
// draw is a pure function of (key, counter), and the sequence is identical on
// every platform. Normal deviates use Box-Muller on consecutive uniforms.
#pragma once

#include <cmath>
#include <cstdint>

namespace eics {

namespace detail {
inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

inline constexpr std::uint64_t splitmix_fin(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}
} // namespace detail

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(derive_key(seed, stream)) {}

    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
        using detail::splitmix_fin;
        return splitmix_fin(splitmix_fin(seed ^ 0x8BADF00D5DEFACEDULL) ^
                            splitmix_fin(stream * detail::kGamma));
    }

    std::uint64_t next_u64() {
        ++counter_;
        return detail::splitmix_fin(key_ + counter_ * detail::kGamma);
    }

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; generates deviates in pairs.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * M_PI * u2;
        cached_ = r * std::sin(t);
        have_cached_ = true;
        return r * std::cos(t);
    }

    /// Child generator seeded from one draw of this stream. Mirrors nested
    /// generator patterns where a sub-process gets its own seed.
    Rng child(std::uint64_t stream) {
        return Rng(next_u64(), stream);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace eics
