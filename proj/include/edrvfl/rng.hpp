#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace edrvfl {

// splitmix64: cheap, well-mixed seed derivation so that per-repetition and
// per-style engines are decorrelated without coordinating draw counts.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(fnv1a(tag) + index));
}

// The named generator: "mt19937_64" everywhere, seeded explicitly.
inline std::mt19937_64 make_engine(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace edrvfl
