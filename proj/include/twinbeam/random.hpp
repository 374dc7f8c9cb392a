//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file twinbeam/random.hpp
//---------------------------------------------------------------------------//
#pragma once

#include <cstdint>
#include <random>

namespace twinbeam
{
//! Engine used for every stochastic operation.
using Engine = std::mt19937_64;

//---------------------------------------------------------------------------//
/*!
 * Stream identifiers for the independent random streams of one frame.
 */
enum class Stream : std::uint64_t
{
    source = 1,
    detector = 2,
    raster = 3,
    bootstrap = 4,
};

//! SplitMix64 finaliser: bijective 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

//---------------------------------------------------------------------------//
/*!
 * Counter-based seed for one (master seed, frame, stream) triple.
 *
 * Frames can be generated in any order, or concurrently, and still get
 * identical draws.
 */
struct FrameSeed
{
    std::uint64_t master{0};
    std::uint64_t frame{0};

    constexpr std::uint64_t derive(Stream s) const noexcept
    {
        return mix64(mix64(mix64(master) ^ frame)
                     + static_cast<std::uint64_t>(s));
    }

    Engine engine(Stream s) const { return Engine{derive(s)}; }
};

}  // namespace twinbeam
