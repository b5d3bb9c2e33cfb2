#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace olfsim {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based stream derivation: the generator for a work item depends only
// on the master seed and the item's coordinates, never on execution order.
inline Rng derive_rng(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master_seed);
  for (auto p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return Rng{h};
}

}  // namespace olfsim
