#include "overfit/rng.hpp"

namespace overfit {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index, StreamTag tag) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ index);
    return splitmix64(h ^ static_cast<std::uint64_t>(tag));
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index, StreamTag tag) {
    const std::uint64_t s = stream_seed(seed, index, tag);
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                      static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
}

}  // namespace overfit
