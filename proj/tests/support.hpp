#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "nn.hpp"
#include "rng.hpp"

namespace fd2k::testing {

// Self-deleting scratch directory.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "fd2k") {
    static std::atomic<int> counter{0};
    const auto stamp = std::random_device{}();
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Bits of the splitmix64 stream state_i = seed + i*golden, least significant bit first.
// The Python reference generator reproduces this exactly.
inline std::vector<std::uint8_t> splitmix_bits(std::uint64_t seed, std::size_t n) {
  std::vector<std::uint8_t> bits;
  bits.reserve(n);
  std::uint64_t state = seed;
  while (bits.size() < n) {
    const auto word = splitmix64(state);
    state += 0x9e3779b97f4a7c15ULL;
    for (int k = 0; k < 64 && bits.size() < n; ++k) bits.push_back(static_cast<std::uint8_t>((word >> k) & 1U));
  }
  return bits;
}

// Network with random dims, random parameters (including biases) of the given output type.
inline Mlp random_mlp(std::mt19937_64& rng, int max_layers, int max_units, Activation output) {
  std::uniform_int_distribution<int> layers(1, max_layers);
  std::uniform_int_distribution<int> units(1, max_units);
  std::vector<int> dims{units(rng)};
  const int L = layers(rng);
  for (int l = 0; l < L; ++l) dims.push_back(units(rng));
  Mlp net(dims, output);
  std::normal_distribution<double> g(0.0, 0.8);
  auto& p = net.mutable_params();
  for (auto& w : p.weights)
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = g(rng);
  for (auto& b : p.biases)
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = g(rng);
  return net;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Norm-wise relative error ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale < 1e-300 ? 0.0 : std::sqrt(diff) / scale;
}

struct GradientCheck {
  double parameter_error = 0.0;
  double input_error = 0.0;
};

// Central differences of L = sum(G .* net(X)) against backward().
inline GradientCheck finite_difference_check(const Mlp& original, const Matrix& X, const Matrix& G,
                                             double h = 1e-5) {
  Mlp net = original;
  auto loss = [&](const Mlp& n, const Matrix& x) { return (forward(n, x).output.cwiseProduct(G)).sum(); };

  auto fwd = forward(net, X);
  const auto back = backward(net, fwd.cache, G);

  std::vector<double> analytic, numeric;
  const auto layers = net.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    for (int which = 0; which < 2; ++which) {
      const Eigen::Index size = which == 0 ? net.params().weights[l].size() : net.params().biases[l].size();
      for (Eigen::Index i = 0; i < size; ++i) {
        auto value = [&](Mlp& n) -> double& {
          auto& p = n.mutable_params();
          return which == 0 ? p.weights[l].data()[i] : p.biases[l].data()[i];
        };
        const double saved = value(net);
        value(net) = saved + h;
        const double up = loss(net, X);
        value(net) = saved - h;
        const double down = loss(net, X);
        value(net) = saved;
        numeric.push_back((up - down) / (2.0 * h));
        analytic.push_back(which == 0 ? back.grads.weights[l].data()[i] : back.grads.biases[l].data()[i]);
      }
    }
  }

  std::vector<double> in_analytic, in_numeric;
  Matrix x = X;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = loss(net, x);
    x.data()[i] = saved - h;
    const double down = loss(net, x);
    x.data()[i] = saved;
    in_numeric.push_back((up - down) / (2.0 * h));
    in_analytic.push_back(back.input_gradient.data()[i]);
  }
  return {relative_error(analytic, numeric), relative_error(in_analytic, in_numeric)};
}

}  // namespace fd2k::testing
