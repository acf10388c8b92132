#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fd2k {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint32_t {
  elu = 0,
  sigmoid = 1,
  linear = 2,
};

const char* activation_name(Activation a);

// Parameter-shaped storage. Used for network parameters, gradients and Adam moments.
struct Parameters {
  std::vector<Matrix> weights;  // layer l: dims[l+1] x dims[l]
  std::vector<Vector> biases;   // layer l: dims[l+1]

  static Parameters zeros(const std::vector<int>& dims);
  bool congruent_with(const Parameters& other) const;
  std::size_t count() const;
  bool all_finite() const;
  void set_zero();
};

using Gradients = Parameters;

// Dense feed-forward network: elu hidden layers, configurable output activation.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> dims, Activation output, Activation hidden = Activation::elu);

  // Glorot-uniform weights, zero biases.
  static Mlp init(const std::vector<int>& dims, Activation output, std::uint64_t seed);

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t layer_count() const { return dims_.size() - 1; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }

  const Parameters& params() const { return params_; }
  // Every mutable access bumps the revision so stale forward caches are detected.
  Parameters& mutable_params() {
    ++revision_;
    return params_;
  }
  std::uint64_t revision() const { return revision_; }

  bool same_shape(const Mlp& other) const;
  bool parameters_equal(const Mlp& other) const;

 private:
  std::vector<int> dims_;
  Activation hidden_ = Activation::elu;
  Activation output_ = Activation::linear;
  Parameters params_;
  std::uint64_t revision_ = 0;
};

struct ForwardCache {
  const Mlp* owner = nullptr;
  std::uint64_t revision = 0;
  std::vector<Matrix> inputs;  // layer inputs, columns are samples
  std::vector<Matrix> pre;     // pre-activations
  std::vector<Matrix> post;    // post-activations
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

struct BackwardResult {
  Gradients grads;
  Matrix input_gradient;
};

// Batched forward pass; each column of `input` is one sample.
ForwardResult forward(const Mlp& net, const Matrix& input);

// Single-sample inference without a cache.
Vector predict(const Mlp& net, const Vector& input);

// Reverse-mode pass. Gradients are summed over the batch columns; callers fold any
// batch averaging into `output_gradient`.
BackwardResult backward(const Mlp& net, const ForwardCache& cache, const Matrix& output_gradient);

struct AdamState {
  Parameters first_moment;
  Parameters second_moment;
  std::int64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_net(const Mlp& net, double learning_rate);
};

void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

// target <- rho * online + (1 - rho) * target
void soft_update(Mlp& target, const Mlp& online, double rho);

// Model file: "FD2K", u32 version, u32 dim count, u32 dims..., u32 hidden tag,
// u32 output tag, then per layer the row-major weights and the bias as f64. All LE.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize(const Mlp& net);
Mlp deserialize(std::span<const std::uint8_t> bytes);
std::size_t serialized_size(const std::vector<int>& dims);

// Parameter blobs (Adam moments) share the model layout.
std::vector<std::uint8_t> serialize_parameters(const Parameters& params, const Mlp& shape);
Parameters deserialize_parameters(std::span<const std::uint8_t> bytes, const Mlp& shape);

void save_model(const std::filesystem::path& path, const Mlp& net);
Mlp load_model(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace fd2k
