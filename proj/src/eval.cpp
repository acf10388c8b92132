#include "eval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"
#include "text.hpp"

namespace fd2k {

std::vector<Key> derive_keys(const Mlp& actor, const PressureTrace& trace, int M, int T, double lambda, Owner owner,
                             std::optional<double> prev_sample) {
  if (actor.input_dim() != M || actor.output_dim() != M) throw DimensionError("derive_keys: actor is not M -> M");
  const auto stats = compute_stats(trace);
  std::vector<Key> keys;
  keys.reserve(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    const auto f = frame(trace, t, M);
    const auto obs = normalize(f, stats);
    const Vector action = predict(actor, Eigen::Map<const Vector>(obs.data(), M));
    const auto mask = binarize(std::span<const double>(action.data(), action.size()), lambda);
    keys.push_back(generate_key(f, mask, prev_sample, owner));
    prev_sample = f.values.back();
  }
  return keys;
}

namespace {

// Mask utilisation cannot be read back from keys, so recompute the masks.
double mean_mask_utilization(const Mlp& actor, const PressureTrace& trace, int M, int T, double lambda) {
  const auto stats = compute_stats(trace);
  std::size_t ones = 0;
  for (int t = 1; t <= T; ++t) {
    const auto obs = normalize(frame(trace, t, M), stats);
    const Vector action = predict(actor, Eigen::Map<const Vector>(obs.data(), M));
    ones += binarize(std::span<const double>(action.data(), action.size()), lambda).ones();
  }
  return static_cast<double>(ones) / (static_cast<double>(M) * T);
}

}  // namespace

EvalReport evaluate_episode(const Mlp& actor_a, const Mlp& actor_b, const AdversaryModel& adversary,
                            const PressureTrace& alice, const PressureTrace& bob, const TrainConfig& config,
                            EpisodeCarry* carry) {
  const int M = config.M;
  const int T = config.T;
  const double lambda = config.lambda;
  const auto needed = static_cast<std::size_t>(M) * T;
  if (alice.samples.size() != needed || bob.samples.size() != needed || adversary.eve_trace.samples.size() != needed)
    throw DimensionError("evaluate_episode: every trace must hold exactly T*M samples");

  EpisodeCarry none;
  EpisodeCarry& c = carry ? *carry : none;

  EvalReport r;
  r.keys_a = derive_keys(actor_a, alice, M, T, lambda, Owner::alice, c.alice);
  r.keys_b = derive_keys(actor_b, bob, M, T, lambda, Owner::bob, c.bob);
  r.keys_e = derive_keys(adversary.eve_actor, adversary.eve_trace, M, T, lambda, Owner::eve, c.eve);
  c.alice = alice.samples.back();
  c.bob = bob.samples.back();
  c.eve = adversary.eve_trace.samples.back();

  // Only the evaluator compares keys across parties.
  double hamming = 0.0;
  for (int t = 0; t < T; ++t) {
    const auto i = static_cast<std::size_t>(t);
    r.kar_ab.push_back(kar(r.keys_a[i], r.keys_b[i]));
    r.kar_ae.push_back(kar(r.keys_a[i], r.keys_e[i]));
    hamming += (1.0 - r.kar_ae.back()) * M;
  }
  r.mean_kar_ab = std::accumulate(r.kar_ab.begin(), r.kar_ab.end(), 0.0) / T;
  r.mean_kar_ae = std::accumulate(r.kar_ae.begin(), r.kar_ae.end(), 0.0) / T;
  const auto gaps = kar_gap(r).per_ts;
  r.min_gap = *std::min_element(gaps.begin(), gaps.end());
  r.uniqueness = hamming / T;
  r.mask_utilization = 0.5 * (mean_mask_utilization(actor_a, alice, M, T, lambda) +
                              mean_mask_utilization(actor_b, bob, M, T, lambda));
  r.eve_mask_utilization = mean_mask_utilization(adversary.eve_actor, adversary.eve_trace, M, T, lambda);
  return r;
}

KarGap kar_gap(const EvalReport& report) {
  if (report.kar_ab.size() != report.kar_ae.size()) throw DimensionError("kar_gap: series lengths differ");
  KarGap g;
  for (std::size_t t = 0; t < report.kar_ab.size(); ++t) g.per_ts.push_back(report.kar_ab[t] - report.kar_ae[t]);
  if (!g.per_ts.empty())
    g.mean_gap = std::accumulate(g.per_ts.begin(), g.per_ts.end(), 0.0) / static_cast<double>(g.per_ts.size());
  return g;
}

BitSequence export_keystream(std::span<const EvalReport> reports, Owner owner) {
  BitSequence bits;
  for (const auto& r : reports) {
    const auto& keys = owner == Owner::alice ? r.keys_a : owner == Owner::bob ? r.keys_b : r.keys_e;
    for (const auto& k : keys) bits.insert(bits.end(), k.bits.begin(), k.bits.end());
  }
  return bits;
}

WindowSource synthetic_windows(const RunConfig& config, std::uint64_t seed) {
  auto synth = std::make_shared<SignalSynthesizer>(config.scenario, config.synth, seed);
  const auto samples = config.scenario.samples_per_episode();
  return [synth, samples]() -> std::optional<TraceSet> { return synth->next(samples); };
}

WindowSource trace_windows(const TraceSet& traces, const ScenarioConfig& scenario) {
  const auto samples = scenario.samples_per_episode();
  const auto& a = trace_for(traces, scenario.alice_node);
  const auto& b = trace_for(traces, scenario.bob_node);
  const auto& e = trace_for(traces, scenario.eve_node);
  const auto windows = std::min({a.samples.size(), b.samples.size(), e.samples.size()}) / samples;
  auto position = std::make_shared<std::size_t>(0);
  return [=]() -> std::optional<TraceSet> {
    if (*position >= windows) return std::nullopt;
    const auto begin = static_cast<std::ptrdiff_t>(*position * samples);
    TraceSet out;
    for (const auto* tr : {&a, &b, &e}) {
      PressureTrace w{tr->node_id,
                      std::vector<double>(tr->samples.begin() + begin, tr->samples.begin() + begin + static_cast<std::ptrdiff_t>(samples)),
                      tr->sample_interval_s};
      out.emplace(tr->node_id, std::move(w));
    }
    ++*position;
    return out;
  };
}

EvalReport summarize(std::span<const EvalReport> episodes) {
  EvalReport s;
  if (episodes.empty()) return s;
  const auto T = episodes.front().kar_ab.size();
  s.kar_ab.assign(T, 0.0);
  s.kar_ae.assign(T, 0.0);
  const double count = static_cast<double>(episodes.size());
  for (const auto& e : episodes) {
    if (e.kar_ab.size() != T) throw DimensionError("summarize: episodes differ in length");
    for (std::size_t t = 0; t < T; ++t) {
      s.kar_ab[t] += e.kar_ab[t] / count;
      s.kar_ae[t] += e.kar_ae[t] / count;
    }
    s.mask_utilization += e.mask_utilization / count;
    s.eve_mask_utilization += e.eve_mask_utilization / count;
    s.uniqueness += e.uniqueness / count;
  }
  const double dT = static_cast<double>(T);
  s.mean_kar_ab = std::accumulate(s.kar_ab.begin(), s.kar_ab.end(), 0.0) / dT;
  s.mean_kar_ae = std::accumulate(s.kar_ae.begin(), s.kar_ae.end(), 0.0) / dT;
  const auto gaps = kar_gap(s).per_ts;
  s.min_gap = gaps.empty() ? 0.0 : *std::min_element(gaps.begin(), gaps.end());
  return s;
}

EvaluationRun evaluate_run(const Mlp& actor_a, const Mlp& actor_b, const Mlp& eve_actor, const WindowSource& windows,
                           const RunConfig& config) {
  config.validate();
  const auto& sc = config.scenario;
  const auto& ev = config.eval;
  EvaluationRun run;
  EpisodeCarry carry;
  std::size_t bits = 0;
  std::size_t cycles = 0;
  long long walk = 0;

  auto satisfied = [&] {
    if (run.episodes.size() < static_cast<std::size_t>(ev.episodes) || bits < ev.min_bits) return false;
    if (!ev.extend_for_excursions) return true;
    // The final partial cycle counts too.
    const auto J = cycles + (walk != 0 ? 1 : 0);
    return J >= static_cast<std::size_t>(ev.min_cycles) || bits >= ev.max_bits;
  };

  while (!satisfied()) {
    auto window = windows();
    if (!window) break;
    AdversaryModel adversary{eve_actor, trace_for(*window, sc.eve_node)};
    run.episodes.push_back(evaluate_episode(actor_a, actor_b, adversary, trace_for(*window, sc.alice_node),
                                            trace_for(*window, sc.bob_node), config.train, &carry));
    for (const auto& k : run.episodes.back().keys_a) {
      for (auto b : k.bits) {
        walk += b ? 1 : -1;
        if (walk == 0) ++cycles;
      }
      bits += k.bits.size();
    }
  }
  if (run.episodes.empty()) throw ConfigError("evaluate_run: no evaluation windows available");
  run.summary = summarize(run.episodes);
  return run;
}

std::string report_json(const EvaluationRun& run, const RunConfig& config) {
  using nlohmann::json;
  const auto& s = run.summary;
  const auto gap = kar_gap(s);
  json j;
  j["episodes"] = run.episodes.size();
  j["M"] = config.train.M;
  j["T"] = config.train.T;
  j["lambda"] = config.train.lambda;
  j["eve_decorrelation"] = config.synth.eve_decorrelation;
  j["keystream_bits"] = run.episodes.size() * static_cast<std::size_t>(config.train.M * config.train.T);
  j["per_ts"] = {{"ts", json::array()}, {"kar_ab", s.kar_ab}, {"kar_ae", s.kar_ae}, {"gap", gap.per_ts}};
  for (std::size_t t = 0; t < s.kar_ab.size(); ++t) j["per_ts"]["ts"].push_back(t + 1);
  j["mean_kar_ab"] = s.mean_kar_ab;
  j["mean_kar_ae"] = s.mean_kar_ae;
  j["mean_gap"] = gap.mean_gap;
  j["min_gap"] = s.min_gap;
  j["mask_utilization"] = s.mask_utilization;
  j["eve_mask_utilization"] = s.eve_mask_utilization;
  j["uniqueness_hamming"] = s.uniqueness;
  return j.dump(2) + "\n";
}

std::string report_csv(const EvalReport& summary) {
  std::ostringstream out;
  out << "ts,kar_ab,kar_ae,gap\n";
  for (std::size_t t = 0; t < summary.kar_ab.size(); ++t) {
    out << t + 1 << ',' << text::format_double(summary.kar_ab[t]) << ',' << text::format_double(summary.kar_ae[t])
        << ',' << text::format_double(summary.kar_ab[t] - summary.kar_ae[t]) << '\n';
  }
  return out.str();
}

void write_key_lines(const std::filesystem::path& path, std::span<const EvalReport> reports, Owner owner) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write key file " + path.string());
  for (const auto& r : reports) {
    const auto& keys = owner == Owner::alice ? r.keys_a : owner == Owner::bob ? r.keys_b : r.keys_e;
    for (const auto& k : keys) out << key_line(k) << '\n';
  }
  if (!out) throw IoError("failed writing key file " + path.string());
}

}  // namespace fd2k
