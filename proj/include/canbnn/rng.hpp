#pragma once

#include <cstdint>

namespace canbnn {

// splitmix64 step; used to derive independent substream seeds from one
// master seed without correlated streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    return splitmix64(s);
}

}  // namespace canbnn
