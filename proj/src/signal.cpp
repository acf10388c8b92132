#include "signal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "errors.hpp"
#include "text.hpp"

namespace fd2k {

void ScenarioConfig::validate() const {
  if (M < 2) throw ConfigError("scenario: M must be >= 2, got " + std::to_string(M));
  if (T < 1) throw ConfigError("scenario: T must be >= 1, got " + std::to_string(T));
  if (alice_node.empty() || bob_node.empty() || eve_node.empty())
    throw ConfigError("scenario: node ids must be non-empty");
  if (alice_node == bob_node || alice_node == eve_node || bob_node == eve_node)
    throw ConfigError("scenario: alice, bob and eve node ids must be distinct");
  if (!(sample_interval_s > 0.0)) throw ConfigError("scenario: sample interval must be positive");
}

void SynthParams::validate() const {
  if (!(period_s > 0.0)) throw ConfigError("synth: period must be positive");
  if (!(diurnal_amplitude >= 0.0)) throw ConfigError("synth: diurnal amplitude must be >= 0");
  if (!(sigma_shared >= 0.0)) throw ConfigError("synth: sigma_shared must be >= 0");
  if (!(sigma_local >= 0.0)) throw ConfigError("synth: sigma_local must be >= 0");
  if (!(eve_decorrelation >= 0.0 && eve_decorrelation <= 1.0))
    throw ConfigError("synth: eve_decorrelation must lie in [0, 1]");
  for (const auto* p : {&alice, &bob, &eve}) {
    if (!std::isfinite(p->gain) || !std::isfinite(p->offset)) throw ConfigError("synth: node gain/offset must be finite");
  }
}

TraceSet load_traces(const std::filesystem::path& path, const ScenarioConfig& config) {
  return load_traces(path, config, config.samples_per_episode());
}

TraceSet load_traces(const std::filesystem::path& path, const ScenarioConfig& config, std::size_t samples) {
  config.validate();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file " + path.string());

  std::string line;
  std::size_t row = 0;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty trace file");
  ++row;
  if (text::trim(line) != "node_id,sample_index,value")
    throw FormatError(path.string() + ": row 1: expected header 'node_id,sample_index,value'");

  std::unordered_map<std::string, std::vector<double>> columns;
  while (std::getline(in, line)) {
    ++row;
    auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    auto cells = text::split(trimmed, ',');
    auto where = [&](int column) {
      return path.string() + ": row " + std::to_string(row) + ", column " + std::to_string(column);
    };
    if (cells.size() != 3) throw FormatError(where(1) + ": expected 3 columns, got " + std::to_string(cells.size()));
    std::string node(text::trim(cells[0]));
    auto index = text::parse_int(cells[1]);
    if (!index) throw FormatError(where(2) + ": non-numeric sample_index '" + std::string(cells[1]) + "'");
    auto value = text::parse_double(cells[2]);
    if (!value) throw FormatError(where(3) + ": non-numeric value '" + std::string(cells[2]) + "'");
    if (!std::isfinite(*value)) throw FormatError(where(3) + ": non-finite value");
    auto& column = columns[node];
    if (*index != static_cast<long long>(column.size()))
      throw FormatError(where(2) + ": node '" + node + "' expected sample_index " + std::to_string(column.size()) +
                        ", got " + std::to_string(*index));
    column.push_back(*value);
  }

  TraceSet out;
  for (const auto& node : {config.alice_node, config.bob_node, config.eve_node}) {
    auto it = columns.find(node);
    if (it == columns.end()) throw FormatError(path.string() + ": missing node id '" + node + "'");
    const auto keep = samples == kAllSamples ? it->second.size() : samples;
    const auto required = samples == kAllSamples ? config.samples_per_episode() : samples;
    if (it->second.size() < required)
      throw FormatError(path.string() + ": node '" + node + "' has " + std::to_string(it->second.size()) +
                        " samples, expected " + std::to_string(required) + " (row count mismatch)");
    PressureTrace trace{node, std::vector<double>(it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(keep)),
                        config.sample_interval_s};
    out.emplace(node, std::move(trace));
  }
  return out;
}

void write_traces(const std::filesystem::path& path, const TraceSet& traces) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write trace file " + path.string());
  out << "node_id,sample_index,value\n";
  for (const auto& [node, trace] : traces) {
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
      out << node << ',' << i << ',' << text::format_double(trace.samples[i]) << '\n';
    }
  }
  if (!out) throw IoError("failed writing trace file " + path.string());
}

SignalSynthesizer::SignalSynthesizer(ScenarioConfig config, SynthParams params, std::uint64_t seed)
    : config_(std::move(config)), params_(params), rng_(seed) {
  config_.validate();
  params_.validate();
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  shared_phase_ = phase(rng_);
  independent_phase_ = phase(rng_);
}

TraceSet SignalSynthesizer::next(std::size_t samples) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double omega = 2.0 * std::numbers::pi * config_.sample_interval_s / params_.period_s;
  const double mix = params_.eve_decorrelation;

  PressureTrace alice{config_.alice_node, {}, config_.sample_interval_s};
  PressureTrace bob{config_.bob_node, {}, config_.sample_interval_s};
  PressureTrace eve{config_.eve_node, {}, config_.sample_interval_s};
  for (auto* tr : {&alice, &bob, &eve}) tr->samples.reserve(samples);

  for (std::size_t i = 0; i < samples; ++i, ++position_) {
    // Draw order is fixed regardless of which sigmas are zero.
    const double shared_step = gauss(rng_);
    const double independent_step = gauss(rng_);
    const double noise_a = gauss(rng_);
    const double noise_b = gauss(rng_);
    const double noise_e = gauss(rng_);

    shared_walk_ += params_.sigma_shared * shared_step;
    independent_walk_ += params_.sigma_shared * independent_step;
    const double angle = omega * static_cast<double>(position_);
    const double shared = params_.diurnal_amplitude * std::sin(angle + shared_phase_) + shared_walk_;
    const double independent = params_.diurnal_amplitude * std::sin(angle + independent_phase_) + independent_walk_;
    const double eve_latent = (1.0 - mix) * shared + mix * independent;

    alice.samples.push_back(params_.alice.gain * shared + params_.alice.offset + params_.sigma_local * noise_a);
    bob.samples.push_back(params_.bob.gain * shared + params_.bob.offset + params_.sigma_local * noise_b);
    eve.samples.push_back(params_.eve.gain * eve_latent + params_.eve.offset + params_.sigma_local * noise_e);
  }

  TraceSet out;
  out.emplace(alice.node_id, std::move(alice));
  out.emplace(bob.node_id, std::move(bob));
  out.emplace(eve.node_id, std::move(eve));
  return out;
}

TraceSet synth_traces(const ScenarioConfig& config, const SynthParams& params, std::uint64_t seed) {
  SignalSynthesizer synth(config, params, seed);
  return synth.next(config.samples_per_episode());
}

const PressureTrace& trace_for(const TraceSet& traces, const std::string& node_id) {
  auto it = traces.find(node_id);
  if (it == traces.end()) throw ConfigError("no trace for node '" + node_id + "'");
  return it->second;
}

SignalFrame frame(const PressureTrace& trace, int t, int M) {
  if (M < 1) throw ConfigError("frame: M must be positive");
  const auto total = static_cast<long long>(trace.samples.size()) / M;
  if (t < 1 || t > total)
    throw RangeError("frame: t=" + std::to_string(t) + " outside [1, " + std::to_string(total) + "] for node '" +
                     trace.node_id + "'");
  const auto begin = trace.samples.begin() + static_cast<std::ptrdiff_t>(t - 1) * M;
  return SignalFrame{t, std::vector<double>(begin, begin + M)};
}

NormalizationStats compute_stats(const PressureTrace& trace) {
  if (trace.samples.empty()) throw ConfigError("compute_stats: empty trace '" + trace.node_id + "'");
  auto [lo, hi] = std::minmax_element(trace.samples.begin(), trace.samples.end());
  NormalizationStats stats{*lo, *hi};
  // A flat trace still needs a non-degenerate range.
  if (!(stats.max > stats.min)) stats.max = stats.min + 1.0;
  return stats;
}

std::vector<double> normalize(const SignalFrame& frame, const NormalizationStats& stats) {
  if (!(stats.min < stats.max)) throw ConfigError("normalize: min must be < max");
  const double span = stats.max - stats.min;
  std::vector<double> out;
  out.reserve(frame.values.size());
  for (double v : frame.values) out.push_back(std::clamp((v - stats.min) / span, 0.0, 1.0));
  return out;
}

double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DimensionError("pearson_correlation: need equal lengths >= 2");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace fd2k
