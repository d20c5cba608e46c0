#pragma once

#include <cstdint>
#include <random>

namespace hncr {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds from one root seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) noexcept {
  return mix_seed(mix_seed(root) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t step) noexcept {
  return derive_seed(derive_seed(root, stream), step);
}

}  // namespace hncr
