#pragma once

#include <cstdint>
#include <random>

namespace kawasaki {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed of stream `index` under `base`; independent of how streams are scheduled.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(base) ^ (index * 0xd1342543de82ef95ULL + 1));
}

inline Rng make_rng(std::uint64_t base, std::uint64_t index) { return Rng(derive_seed(base, index)); }

}  // namespace kawasaki
