#pragma once

#include <cstdint>
#include <random>

namespace setad {

using Rng = std::mt19937_64;

// Independent generator for a named stream of a base seed, so that e.g. the
// initializer and the set sampler of one run never share draws.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

namespace streams {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t sampler = 2;
inline constexpr std::uint64_t split = 3;
inline constexpr std::uint64_t synth = 4;
inline constexpr std::uint64_t contexts = 5;
}  // namespace streams

}  // namespace setad
