#pragma once

#include <cstdint>
#include <random>

namespace cfrl {

using Rng = std::mt19937_64;

// splitmix64 finalizer; maps (master, stream) to a well-mixed child seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Named streams so independent consumers of one master seed never collide.
enum class SeedStream : std::uint64_t {
  kInit = 1,
  kNoise = 2,
  kReplay = 3,
  kSplit = 4,
  kGenerator = 5,
  kCluster = 6,
  kGa = 7,
  kShuffle = 8,
};

inline std::uint64_t derive_seed(std::uint64_t master, SeedStream stream) {
  return derive_seed(master, static_cast<std::uint64_t>(stream));
}

}  // namespace cfrl
