#include "keygen.hpp"

#include <numeric>

#include "errors.hpp"

namespace fd2k {

std::size_t FeatureMask::ones() const { return std::accumulate(bits.begin(), bits.end(), std::size_t{0}); }

FeatureMask binarize(std::span<const double> action, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("binarize: lambda must lie in (0, 1)");
  FeatureMask mask;
  mask.bits.reserve(action.size());
  for (double a : action) mask.bits.push_back(a >= lambda ? 1 : 0);
  return mask;
}

Key generate_key(const SignalFrame& frame, const FeatureMask& mask, std::optional<double> prev_sample,
                 Owner owner) {
  const auto& P = frame.values;
  if (P.size() != mask.bits.size())
    throw DimensionError("generate_key: frame has " + std::to_string(P.size()) + " samples, mask has " +
                         std::to_string(mask.bits.size()));
  Key key{std::vector<std::uint8_t>(P.size(), 0), owner, frame.ts_index};
  for (std::size_t m = 0; m < P.size(); ++m) {
    const double previous = m == 0 ? prev_sample.value_or(P[0]) : P[m - 1];
    key.bits[m] = (mask.bits[m] == 1 && P[m] >= previous) ? 1 : 0;
  }
  return key;
}

double kar(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y) {
  if (x.size() != y.size()) throw DimensionError("kar: key lengths differ");
  if (x.empty()) throw DimensionError("kar: empty keys");
  std::size_t mismatches = 0;
  for (std::size_t m = 0; m < x.size(); ++m) mismatches += x[m] != y[m] ? 1 : 0;
  return 1.0 - static_cast<double>(mismatches) / static_cast<double>(x.size());
}

double kar(const Key& x, const Key& y) { return kar(x.bits, y.bits); }

double mask_utilization(const FeatureMask& a, const FeatureMask& b) {
  if (a.bits.size() != b.bits.size() || a.bits.empty()) throw DimensionError("mask_utilization: mask lengths differ");
  return static_cast<double>(a.ones() + b.ones()) / (2.0 * static_cast<double>(a.bits.size()));
}

double reward(const Key& key_a, const Key& key_b, const FeatureMask& mask_a, const FeatureMask& mask_b) {
  const auto M = key_a.bits.size();
  if (key_b.bits.size() != M || mask_a.bits.size() != M || mask_b.bits.size() != M)
    throw DimensionError("reward: keys and masks must all have length M");
  const double agreement = kar(key_a, key_b);
  const double phi = agreement == 1.0 ? 1.0 : 0.0;
  return agreement + phi * mask_utilization(mask_a, mask_b);
}

std::string key_line(const Key& key) {
  std::string line;
  line.reserve(key.bits.size() + 8);
  line.push_back(static_cast<char>(key.owner));
  line += ',';
  line += std::to_string(key.ts_index);
  line += ',';
  for (auto b : key.bits) line.push_back(b ? '1' : '0');
  return line;
}

}  // namespace fd2k
