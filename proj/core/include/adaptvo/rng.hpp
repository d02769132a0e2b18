#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace adaptvo {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a key, e.g.
/// (seed, env_index) or (seed, frame_index).
constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t key) noexcept {
  return splitmix64(base ^ splitmix64(key + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t mix_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) noexcept {
  for (std::uint64_t k : keys) base = mix_seed(base, k);
  return base;
}

}  // namespace adaptvo
