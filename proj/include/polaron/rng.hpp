#pragma once

#include <cstdint>
#include <random>

namespace polaron {

// One root seed spawns independent, reproducible streams keyed by an id
// (chain index, path index, ...). The derivation is a splitmix64 step so
// nearby ids give uncorrelated engine states.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 derive_stream(std::uint64_t root_seed, std::uint64_t stream_id) {
    std::uint64_t s = splitmix64(root_seed + 0x9E3779B97F4A7C15ULL * stream_id);
    // a second scramble decorrelates (seed, id) pairs that collide additively
    s = splitmix64(s ^ (stream_id << 1 | 1));
    return std::mt19937_64(s);
}

} // namespace polaron
