#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "config.hpp"
#include "keygen.hpp"
#include "nn.hpp"
#include "randomness.hpp"
#include "signal.hpp"

namespace fd2k {

// Eve holds a stolen copy of Bob's trained actor but only her own signal.
struct AdversaryModel {
  Mlp eve_actor;
  PressureTrace eve_trace;
};

// Last sample seen by each party, so consecutive windows continue one recording.
struct EpisodeCarry {
  std::optional<double> alice;
  std::optional<double> bob;
  std::optional<double> eve;
};

struct EvalReport {
  std::vector<double> kar_ab;  // per time step
  std::vector<double> kar_ae;
  double mean_kar_ab = 0.0;
  double mean_kar_ae = 0.0;
  double min_gap = 0.0;
  double mask_utilization = 0.0;      // Alice and Bob
  double eve_mask_utilization = 0.0;
  double uniqueness = 0.0;  // mean Hamming distance between Alice's and Eve's keys, bits per time step
  std::vector<Key> keys_a;
  std::vector<Key> keys_b;
  std::vector<Key> keys_e;
};

// One party's decentralised key path: own actor, own observations, nothing else.
std::vector<Key> derive_keys(const Mlp& actor, const PressureTrace& trace, int M, int T, double lambda, Owner owner,
                             std::optional<double> prev_sample = std::nullopt);

EvalReport evaluate_episode(const Mlp& actor_a, const Mlp& actor_b, const AdversaryModel& adversary,
                            const PressureTrace& alice, const PressureTrace& bob, const TrainConfig& config,
                            EpisodeCarry* carry = nullptr);

struct KarGap {
  double mean_gap = 0.0;
  std::vector<double> per_ts;
};

KarGap kar_gap(const EvalReport& report);

// Time-step-ordered concatenation of one owner's keys across episodes.
BitSequence export_keystream(std::span<const EvalReport> reports, Owner owner);

struct EvaluationRun {
  std::vector<EvalReport> episodes;
  EvalReport summary;  // per-time-step means over episodes, no keys
};

// Supplies the next evaluation window (alice, bob, eve traces of T*M samples), or nullopt
// when the source is exhausted.
using WindowSource = std::function<std::optional<TraceSet>()>;

WindowSource synthetic_windows(const RunConfig& config, std::uint64_t seed);
WindowSource trace_windows(const TraceSet& traces, const ScenarioConfig& scenario);

// Runs consecutive episodes until eval.episodes and eval.min_bits are met and, when
// extension is on, Alice's keystream has eval.min_cycles excursion cycles (bounded by
// eval.max_bits).
EvaluationRun evaluate_run(const Mlp& actor_a, const Mlp& actor_b, const Mlp& eve_actor, const WindowSource& windows,
                           const RunConfig& config);

EvalReport summarize(std::span<const EvalReport> episodes);

std::string report_json(const EvaluationRun& run, const RunConfig& config);
std::string report_csv(const EvalReport& summary);
void write_key_lines(const std::filesystem::path& path, std::span<const EvalReport> reports, Owner owner);

}  // namespace fd2k
