#pragma once

// Deterministic random substreams keyed by (master seed, role, index) so that
// per-round work can run in any order or process and reproduce bit-for-bit.

#include <cstdint>
#include <random>

namespace qkd {

using Stream = std::mt19937_64;

enum class StreamTag : std::uint64_t {
    Alice = 1,
    Bob = 2,
    Channel = 3,
    Sample = 4,
    Distill = 5,
    Labels = 6,
    Hash = 7,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, StreamTag tag, std::uint64_t index) {
    return splitmix64(splitmix64(splitmix64(master) ^ static_cast<std::uint64_t>(tag)) ^ index);
}

inline Stream substream(std::uint64_t master, StreamTag tag, std::uint64_t index) {
    return Stream(derive_seed(master, tag, index));
}

/// Uniform integer in [0, bound).
inline std::uint64_t uniform_below(Stream& s, std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(s);
}

inline double uniform_unit(Stream& s) { return std::uniform_real_distribution<double>(0.0, 1.0)(s); }

}  // namespace qkd
