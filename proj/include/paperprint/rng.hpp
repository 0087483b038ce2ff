#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "paperprint/grid.hpp"

namespace paperprint {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed for the stream keyed by (seed, k0, k1, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys)
{
    std::uint64_t s = splitmix64(seed);
    for (std::uint64_t k : keys)
        s = splitmix64(s ^ splitmix64(k + 0x632BE59BD9B4E019ULL));
    return s;
}

using Rng = std::mt19937_64;

/// i.i.d. N(0, stddev^2) grid drawn from a fresh stream.
Grid white_noise(std::size_t rows, std::size_t cols, double stddev, std::uint64_t seed);

} // namespace paperprint
