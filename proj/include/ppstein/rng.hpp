#pragma once

// Reproducible random streams. A stream is identified by (master_seed,
// stream_id); its engine is seeded from a 128-bit BLAKE2b digest of the pair,
// so any worker can reconstruct any stream without coordination.

#include <sodium.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <stdexcept>

namespace ppstein {

namespace detail {

inline std::array<unsigned char, 16> blake2b_128(std::uint64_t a, std::uint64_t b)
{
    static const int init = sodium_init();
    if (init < 0) {
        throw std::runtime_error("libsodium initialisation failed");
    }
    std::array<unsigned char, 16> in{};
    for (int i = 0; i < 8; ++i) {
        in[i] = static_cast<unsigned char>(a >> (8 * i));
        in[8 + i] = static_cast<unsigned char>(b >> (8 * i));
    }
    std::array<unsigned char, 16> out{};
    crypto_generichash(out.data(), out.size(), in.data(), in.size(), nullptr, 0);
    return out;
}

}  // namespace detail

using Engine = std::mt19937_64;

struct RngStream {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;

    /// Engine seeded from BLAKE2b-128(master_seed, stream_id). std::seed_seq and
    /// mt19937_64 are fully specified by the standard, so draws are portable.
    [[nodiscard]] Engine engine() const
    {
        const auto digest = detail::blake2b_128(master_seed, stream_id);
        std::array<std::uint32_t, 4> words{};
        std::memcpy(words.data(), digest.data(), digest.size());
        std::seed_seq seq(words.begin(), words.end());
        return Engine(seq);
    }

    /// Independent sub-stream, e.g. for inner integration within a replication.
    [[nodiscard]] RngStream child(std::uint64_t tag) const
    {
        const auto digest = detail::blake2b_128(master_seed, stream_id);
        std::uint64_t derived = 0;
        std::memcpy(&derived, digest.data(), sizeof(derived));
        return {derived, tag};
    }

    friend bool operator==(const RngStream&, const RngStream&) = default;
};

/// Uniform double on the open interval (0, 1) from the top 53 bits.
inline double uniform01(Engine& eng)
{
    return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform(Engine& eng, double lo, double hi)
{
    return lo + (hi - lo) * uniform01(eng);
}

/// Poisson variate: sequential inversion for mean <= 30, otherwise Hoermann's
/// transformed rejection with squeeze (PTRS).
inline std::uint64_t sample_poisson_count(Engine& eng, double mean)
{
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
        throw std::domain_error("sample_poisson_count: mean must be finite and nonnegative");
    }
    if (mean == 0.0) {
        return 0;
    }
    if (mean <= 30.0) {
        const double u = uniform01(eng);
        double p = std::exp(-mean);
        double cdf = p;
        std::uint64_t k = 0;
        while (u > cdf) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
            if (p == 0.0 && cdf < u) {
                break;  // rounding left u above the attainable cdf
            }
        }
        return k;
    }

    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = uniform01(eng) - 0.5;
        const double v = uniform01(eng);
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= vr) {
            return static_cast<std::uint64_t>(k);
        }
        if (k < 0.0 || (us < 0.013 && v > us)) {
            continue;
        }
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -mean + k * loglam - std::lgamma(k + 1.0)) {
            return static_cast<std::uint64_t>(k);
        }
    }
}

}  // namespace ppstein
