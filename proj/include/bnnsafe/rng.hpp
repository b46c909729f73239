#pragma once

#include <cstdint>
#include <random>

namespace bnnsafe {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix_seed(mix_seed(master) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                    std::uint64_t stream) {
  return derive_seed(derive_seed(master, index), stream);
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

// Named per-episode streams so that e.g. toggling the monitor does not shift
// the disturbance draws.
enum class Stream : std::uint64_t {
  disturbance = 1,
  weather = 2,
  controller = 3,
};

inline Rng stream_rng(std::uint64_t episode_seed, Stream s) {
  return Rng{derive_seed(episode_seed, static_cast<std::uint64_t>(s))};
}

}  // namespace bnnsafe
