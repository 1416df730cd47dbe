#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace da3d {

using Rng = std::mt19937_64;

// All randomness flows from one seed through named substreams
// ("split", "init", "shuffle", "synth", ...).
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finalizer over the combination
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::string_view name) {
  return Rng(substream_seed(seed, name));
}

}  // namespace da3d
