#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "signal.hpp"

namespace fd2k {

enum class Owner : char {
  alice = 'A',
  bob = 'B',
  eve = 'E',
};

struct FeatureMask {
  std::vector<std::uint8_t> bits;

  std::size_t ones() const;
};

struct Key {
  std::vector<std::uint8_t> bits;
  Owner owner = Owner::alice;
  int ts_index = 0;
};

// bit m = 1 iff action[m] >= lambda
FeatureMask binarize(std::span<const double> action, double lambda);

// Differential key: bit m = 1 iff mask[m] == 1 and P[m] >= P[m-1].
// P[-1] is `prev_sample` (last sample of the previous time step); without one the first
// comparison is made against P[0] itself and therefore holds.
Key generate_key(const SignalFrame& frame, const FeatureMask& mask, std::optional<double> prev_sample,
                 Owner owner);

// Fraction of agreeing bits.
double kar(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y);
double kar(const Key& x, const Key& y);

// KAR plus the mask-utilisation bonus, which only counts when the keys agree exactly.
double reward(const Key& key_a, const Key& key_b, const FeatureMask& mask_a, const FeatureMask& mask_b);

double mask_utilization(const FeatureMask& a, const FeatureMask& b);

// "A,3,0110..." export line.
std::string key_line(const Key& key);

}  // namespace fd2k
