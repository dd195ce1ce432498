#pragma once

#include <cstdint>
#include <random>

namespace overfit {

enum class StreamTag : std::uint64_t {
    Signals = 1,
    Noise = 2,
    RandomModel = 3,
    Resample = 4,
};

// Seed for the independent stream identified by (seed, index, tag).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index, StreamTag tag);

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index, StreamTag tag);

}  // namespace overfit
