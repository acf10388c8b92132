#pragma once

#include <cstdint>
#include <random>

namespace fd2k {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent sub-seeds for the stages of one run (synthesis, init, training, eval).
enum class SeedStream : std::uint64_t {
  synth = 1,
  init = 2,
  training = 3,
  eval_synth = 4,
  eval_noise = 5,
};

inline std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) {
  return splitmix64(splitmix64(seed) ^ (static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL));
}

}  // namespace fd2k
