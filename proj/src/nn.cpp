#include "nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "errors.hpp"
#include "rng.hpp"

namespace fd2k {

namespace {

Matrix activate(const Matrix& pre, Activation a) {
  switch (a) {
    case Activation::elu:
      return pre.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
    case Activation::sigmoid:
      return pre.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    case Activation::linear:
      return pre;
  }
  throw Error("unknown activation");
}

// d post / d pre, expressed through the cached values.
Matrix activation_derivative(const Matrix& pre, const Matrix& post, Activation a) {
  switch (a) {
    case Activation::elu:
      return pre.binaryExpr(post, [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
    case Activation::sigmoid:
      return post.unaryExpr([](double y) { return y * (1.0 - y); });
    case Activation::linear:
      return Matrix::Ones(pre.rows(), pre.cols());
  }
  throw Error("unknown activation");
}

void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw ConfigError("mlp: need at least input and output dims");
  for (int d : dims)
    if (d <= 0) throw ConfigError("mlp: layer dims must be positive");
}

bool valid_activation(std::uint32_t tag) { return tag <= static_cast<std::uint32_t>(Activation::linear); }

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  std::vector<std::uint8_t> out;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  void magic() {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, "FD2K", 4) != 0) throw FormatError("model: bad magic, expected 'FD2K'");
    pos_ += 4;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("model: truncated payload");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_header(ByteWriter& w, const Mlp& net) {
  for (char c : {'F', 'D', '2', 'K'}) w.out.push_back(static_cast<std::uint8_t>(c));
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(net.dims().size()));
  for (int d : net.dims()) w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(net.hidden_activation()));
  w.u32(static_cast<std::uint32_t>(net.output_activation()));
}

void write_params(ByteWriter& w, const Parameters& p) {
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const auto& W = p.weights[l];
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) w.f64(W(r, c));
    for (Eigen::Index r = 0; r < p.biases[l].size(); ++r) w.f64(p.biases[l](r));
  }
}

Mlp read_header(ByteReader& r) {
  r.magic();
  const auto version = r.u32();
  if (version != kModelFormatVersion)
    throw FormatError("model: unsupported format version " + std::to_string(version));
  const auto count = r.u32();
  if (count < 2 || count > 1024) throw FormatError("model: implausible layer dim count " + std::to_string(count));
  std::vector<int> dims;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto d = r.u32();
    if (d == 0 || d > (1u << 20)) throw FormatError("model: invalid layer dim");
    dims.push_back(static_cast<int>(d));
  }
  const auto hidden = r.u32();
  const auto output = r.u32();
  if (!valid_activation(hidden) || !valid_activation(output)) throw FormatError("model: unknown activation tag");
  return Mlp(dims, static_cast<Activation>(output), static_cast<Activation>(hidden));
}

void read_params(ByteReader& r, Parameters& p) {
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    auto& W = p.weights[l];
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = r.f64();
    for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) p.biases[l](i) = r.f64();
  }
  if (!r.done()) throw FormatError("model: trailing bytes after parameters");
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::elu:
      return "elu";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::linear:
      return "linear";
  }
  return "unknown";
}

Parameters Parameters::zeros(const std::vector<int>& dims) {
  Parameters p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    p.weights.push_back(Matrix::Zero(dims[l + 1], dims[l]));
    p.biases.push_back(Vector::Zero(dims[l + 1]));
  }
  return p;
}

bool Parameters::congruent_with(const Parameters& other) const {
  if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() || weights[l].cols() != other.weights[l].cols()) return false;
    if (biases[l].size() != other.biases[l].size()) return false;
  }
  return true;
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

bool Parameters::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  return true;
}

void Parameters::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

Mlp::Mlp(std::vector<int> dims, Activation output, Activation hidden)
    : dims_(std::move(dims)), hidden_(hidden), output_(output) {
  check_dims(dims_);
  params_ = Parameters::zeros(dims_);
}

Mlp Mlp::init(const std::vector<int>& dims, Activation output, std::uint64_t seed) {
  Mlp net(dims, output);
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    auto& W = net.params_.weights[l];
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = dist(rng);
  }
  return net;
}

bool Mlp::same_shape(const Mlp& other) const {
  return dims_ == other.dims_ && hidden_ == other.hidden_ && output_ == other.output_;
}

bool Mlp::parameters_equal(const Mlp& other) const {
  if (!same_shape(other)) return false;
  for (std::size_t l = 0; l < params_.weights.size(); ++l) {
    if (params_.weights[l] != other.params_.weights[l]) return false;
    if (params_.biases[l] != other.params_.biases[l]) return false;
  }
  return true;
}

ForwardResult forward(const Mlp& net, const Matrix& input) {
  if (net.dims().empty()) throw DimensionError("forward: uninitialised network");
  if (input.rows() != net.input_dim())
    throw DimensionError("forward: input has " + std::to_string(input.rows()) + " rows, network expects " +
                         std::to_string(net.input_dim()));
  ForwardResult result;
  auto& cache = result.cache;
  cache.owner = &net;
  cache.revision = net.revision();
  const auto layers = net.layer_count();
  cache.inputs.reserve(layers);
  cache.pre.reserve(layers);
  cache.post.reserve(layers);

  const auto& p = net.params();
  Matrix x = input;
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = p.weights[l] * x;
    z.colwise() += p.biases[l];
    const auto act = l + 1 == layers ? net.output_activation() : net.hidden_activation();
    Matrix y = activate(z, act);
    cache.inputs.push_back(std::move(x));
    cache.pre.push_back(std::move(z));
    x = y;
    cache.post.push_back(std::move(y));
  }
  result.output = std::move(x);
  return result;
}

Vector predict(const Mlp& net, const Vector& input) {
  if (input.size() != net.input_dim())
    throw DimensionError("predict: input length " + std::to_string(input.size()) + ", network expects " +
                         std::to_string(net.input_dim()));
  const auto& p = net.params();
  Vector x = input;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Vector z = p.weights[l] * x + p.biases[l];
    const auto act = l + 1 == net.layer_count() ? net.output_activation() : net.hidden_activation();
    x = activate(z, act);
  }
  return x;
}

BackwardResult backward(const Mlp& net, const ForwardCache& cache, const Matrix& output_gradient) {
  if (cache.owner != &net || cache.revision != net.revision())
    throw DimensionError("backward: cache does not belong to this network state");
  const auto layers = net.layer_count();
  if (cache.pre.size() != layers) throw DimensionError("backward: cache layer count mismatch");
  const auto& out = cache.post.back();
  if (output_gradient.rows() != out.rows() || output_gradient.cols() != out.cols())
    throw DimensionError("backward: output gradient shape mismatch");

  BackwardResult result;
  result.grads = Parameters::zeros(net.dims());
  const auto& p = net.params();

  Matrix delta = output_gradient.cwiseProduct(
      activation_derivative(cache.pre.back(), cache.post.back(), net.output_activation()));
  for (std::size_t i = layers; i-- > 0;) {
    result.grads.weights[i].noalias() = delta * cache.inputs[i].transpose();
    result.grads.biases[i] = delta.rowwise().sum();
    Matrix upstream = p.weights[i].transpose() * delta;
    if (i == 0) {
      result.input_gradient = std::move(upstream);
    } else {
      delta = upstream.cwiseProduct(
          activation_derivative(cache.pre[i - 1], cache.post[i - 1], net.hidden_activation()));
    }
  }
  return result;
}

AdamState AdamState::for_net(const Mlp& net, double learning_rate) {
  AdamState s;
  s.first_moment = Parameters::zeros(net.dims());
  s.second_moment = Parameters::zeros(net.dims());
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state) {
  if (!grads.congruent_with(net.params()) || !state.first_moment.congruent_with(net.params()) ||
      !state.second_moment.congruent_with(net.params()))
    throw DimensionError("adam_step: gradient/moment shapes do not match network");
  if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient rejected");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  const double lr = state.learning_rate;
  const double eps = state.eps;
  const double b1 = state.beta1;
  const double b2 = state.beta2;

  auto& p = net.mutable_params();
  auto apply = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    apply(p.weights[l], grads.weights[l], state.first_moment.weights[l], state.second_moment.weights[l]);
    apply(p.biases[l], grads.biases[l], state.first_moment.biases[l], state.second_moment.biases[l]);
  }
}

void soft_update(Mlp& target, const Mlp& online, double rho) {
  if (!target.same_shape(online)) throw DimensionError("soft_update: network shapes differ");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("soft_update: rho must lie in [0, 1]");
  auto& t = target.mutable_params();
  const auto& o = online.params();
  for (std::size_t l = 0; l < t.weights.size(); ++l) {
    t.weights[l] = rho * o.weights[l] + (1.0 - rho) * t.weights[l];
    t.biases[l] = rho * o.biases[l] + (1.0 - rho) * t.biases[l];
  }
}

std::size_t serialized_size(const std::vector<int>& dims) {
  std::size_t params = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    params += static_cast<std::size_t>(dims[l]) * dims[l + 1] + dims[l + 1];
  return 4 + 4 + 4 + 4 * dims.size() + 4 + 4 + 8 * params;
}

std::vector<std::uint8_t> serialize(const Mlp& net) {
  ByteWriter w;
  w.out.reserve(serialized_size(net.dims()));
  write_header(w, net);
  write_params(w, net.params());
  return std::move(w.out);
}

Mlp deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Mlp net = read_header(r);
  read_params(r, net.mutable_params());
  if (!net.params().all_finite()) throw FormatError("model: non-finite parameter");
  return net;
}

std::vector<std::uint8_t> serialize_parameters(const Parameters& params, const Mlp& shape) {
  if (!params.congruent_with(shape.params())) throw DimensionError("serialize_parameters: shape mismatch");
  ByteWriter w;
  write_header(w, shape);
  write_params(w, params);
  return std::move(w.out);
}

Parameters deserialize_parameters(std::span<const std::uint8_t> bytes, const Mlp& shape) {
  ByteReader r(bytes);
  Mlp header = read_header(r);
  if (!header.same_shape(shape)) throw FormatError("parameter blob: shape does not match network");
  Parameters p = Parameters::zeros(shape.dims());
  read_params(r, p);
  return p;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  // Write-then-rename so a reader never sees a half-written model.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_model(const std::filesystem::path& path, const Mlp& net) { write_file_bytes(path, serialize(net)); }

Mlp load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("model file not found: " + path.string());
  return deserialize(read_file_bytes(path));
}

}  // namespace fd2k
