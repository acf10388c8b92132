#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rng.hpp"

namespace fd2k {

// Pressure samples (psi) for one sensor node, stored as T consecutive frames of M samples.
struct PressureTrace {
  std::string node_id;
  std::vector<double> samples;
  double sample_interval_s = 19.0;
};

struct SignalFrame {
  int ts_index = 0;  // 1-based time step
  std::vector<double> values;
};

struct NormalizationStats {
  double min = 0.0;
  double max = 1.0;
};

struct ScenarioConfig {
  std::string alice_node = "18";
  std::string bob_node = "8";
  std::string eve_node = "eve";
  int M = 20;
  int T = 19;
  double sample_interval_s = 19.0;

  std::size_t samples_per_episode() const { return static_cast<std::size_t>(M) * static_cast<std::size_t>(T); }
  void validate() const;
};

struct NodeProfile {
  double gain = 1.0;
  double offset = 0.0;
};

// Synthetic stand-in for an exported hydraulic simulation. Every node sees a diurnal
// demand waveform plus a slow random-walk fluctuation scaled by its own gain/offset.
struct SynthParams {
  double period_s = 86400.0;
  double diurnal_amplitude = 2.0;
  NodeProfile alice{1.0, 62.0};
  NodeProfile bob{0.85, 48.0};
  NodeProfile eve{0.9, 55.0};
  double sigma_shared = 0.3;   // random-walk innovation per sample
  double sigma_local = 0.005;  // independent sensor noise per node
  double eve_decorrelation = 1.0;

  void validate() const;
};

using TraceSet = std::map<std::string, PressureTrace>;

// Reads `node_id,sample_index,value` rows. Every declared node must provide at least
// `samples` consecutive samples starting at index 0; longer traces are truncated.
// kAllSamples keeps whole recordings (at least one episode each).
inline constexpr std::size_t kAllSamples = static_cast<std::size_t>(-1);
TraceSet load_traces(const std::filesystem::path& path, const ScenarioConfig& config);
TraceSet load_traces(const std::filesystem::path& path, const ScenarioConfig& config, std::size_t samples);

void write_traces(const std::filesystem::path& path, const TraceSet& traces);

// Stateful generator; successive calls to next() continue the same signals, so
// consecutive windows behave like one long recording.
class SignalSynthesizer {
 public:
  SignalSynthesizer(ScenarioConfig config, SynthParams params, std::uint64_t seed);

  TraceSet next(std::size_t samples);

 private:
  ScenarioConfig config_;
  SynthParams params_;
  Rng rng_;
  double shared_phase_ = 0.0;
  double independent_phase_ = 0.0;
  double shared_walk_ = 0.0;
  double independent_walk_ = 0.0;
  std::uint64_t position_ = 0;
};

TraceSet synth_traces(const ScenarioConfig& config, const SynthParams& params, std::uint64_t seed);

const PressureTrace& trace_for(const TraceSet& traces, const std::string& node_id);

// Samples [(t-1)*M, t*M) of the trace.
SignalFrame frame(const PressureTrace& trace, int t, int M);

NormalizationStats compute_stats(const PressureTrace& trace);

// Min/max scaling clamped to [0, 1].
std::vector<double> normalize(const SignalFrame& frame, const NormalizationStats& stats);

double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace fd2k
