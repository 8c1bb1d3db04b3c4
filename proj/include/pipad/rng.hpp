#pragma once

#include <cstdint>
#include <random>

namespace pipad {

// Platform-stable draws on top of mt19937_64. The standard distributions
// are implementation-defined, so generated datasets would differ between
// standard libraries.
using Rng = std::mt19937_64;

inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound)
{
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(rng()) * bound) >> 64);
}

/// Uniform float in [0, 1) on a 2^-24 grid.
inline float uniform_unit(Rng& rng)
{
    return static_cast<float>(rng() >> 40) * 0x1.0p-24f;
}

/// Mixes a seed with a stream id so independent streams stay decorrelated.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream)
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace pipad
