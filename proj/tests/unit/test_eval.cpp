#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "agent.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "federated.hpp"
#include "support.hpp"

using namespace fd2k;


namespace {

// M -> M actor whose mask is all ones regardless of input.
Mlp always_on(int M) {
  Mlp net({M, M}, Activation::sigmoid);
  net.mutable_params().weights[0].setZero();
  net.mutable_params().biases[0].setConstant(10.0);
  return net;
}

Mlp random_actor(int M, std::uint64_t seed) {
  AgentOptions o;
  o.M = M;
  return init_and_distribute(seed, actor_dims(o), 5).actor_a;
}

TrainConfig config(int M, int T) {
  TrainConfig c;
  c.M = M;
  c.T = T;
  return c;
}

PressureTrace tr(std::string id, std::vector<double> v) { return PressureTrace{std::move(id), std::move(v)}; }

RunConfig small_run(int episodes, std::size_t min_bits, bool extend) {
  RunConfig rc;
  rc.eval.episodes = episodes;
  rc.eval.min_bits = min_bits;
  rc.eval.extend_for_excursions = extend;
  return rc;
}

}  // namespace

TEST_CASE("evaluate_episode: hand-built M=2, T=2") {
  const auto c = config(2, 2);
  const auto on = always_on(2);
  const AdversaryModel eve{on, tr("eve", {2, 1, 1, 1})};
  const auto r = evaluate_episode(on, on, eve, tr("18", {1, 2, 3, 1}), tr("8", {1, 3, 2, 0}), c);
  CHECK(r.keys_a[0].bits == BitSequence{1, 1});
  CHECK(r.keys_a[1].bits == BitSequence{1, 0});
  CHECK(r.keys_b[1].bits == BitSequence{0, 0});
  CHECK(r.keys_e[0].bits == BitSequence{1, 0});
  CHECK(r.keys_e[1].bits == BitSequence{1, 1});
  CHECK(r.kar_ab == std::vector<double>{1.0, 0.5});
  CHECK(r.kar_ae == std::vector<double>{0.5, 0.5});
  CHECK(r.mean_kar_ab == 0.75);
  CHECK(r.mean_kar_ae == 0.5);
  CHECK(r.min_gap == 0.0);
  CHECK(r.uniqueness == 1.0);
  CHECK(r.mask_utilization == 1.0);
  CHECK(r.eve_mask_utilization == 1.0);
  CHECK(kar_gap(r).mean_gap == 0.25);
  CHECK(kar_gap(r).per_ts == std::vector<double>{0.5, 0.0});
  CHECK(r.keys_a[1].ts_index == 2);
  CHECK(r.keys_e[0].owner == Owner::eve);
}

TEST_CASE("evaluate_episode: carry continues the previous window") {
  const auto c = config(2, 1);
  const auto on = always_on(2);
  EpisodeCarry carry;
  const AdversaryModel eve{on, tr("eve", {5, 5})};
  evaluate_episode(on, on, eve, tr("18", {1, 9}), tr("8", {1, 0}), c, &carry);
  CHECK(carry.alice == 9.0);
  CHECK(carry.bob == 0.0);
  CHECK(carry.eve == 5.0);
  // First sample now compares against the carried value, not itself.
  const auto r = evaluate_episode(on, on, eve, tr("18", {3, 4}), tr("8", {3, 4}), c, &carry);
  CHECK(r.keys_a[0].bits == BitSequence{0, 1});
  CHECK(r.keys_b[0].bits == BitSequence{1, 1});
  CHECK(r.keys_e[0].bits == BitSequence{1, 1});
}

TEST_CASE("evaluate_episode: Eve with Bob's actor and Bob's signal matches Bob") {
  const ScenarioConfig sc;
  const auto traces = synth_traces(sc, SynthParams{}, 3);
  const auto& a = trace_for(traces, "18");
  const auto& b = trace_for(traces, "8");
  const auto actor_a = random_actor(sc.M, 1), actor_b = random_actor(sc.M, 2);
  const auto r = evaluate_episode(actor_a, actor_b, AdversaryModel{actor_b, b}, a, b, config(sc.M, sc.T));
  CHECK(r.kar_ae == r.kar_ab);
  for (std::size_t t = 0; t < r.keys_b.size(); ++t) CHECK(r.keys_e[t].bits == r.keys_b[t].bits);
  // Identical actors and traces agree everywhere.
  const auto same = evaluate_episode(actor_a, actor_a, AdversaryModel{actor_a, a}, a, a, config(sc.M, sc.T));
  CHECK(same.mean_kar_ab == 1.0);
  CHECK(same.mean_kar_ae == 1.0);
  CHECK(same.uniqueness == 0.0);
  CHECK_THROWS_AS(evaluate_episode(actor_a, actor_b, AdversaryModel{actor_b, b}, a, tr("8", {1, 2}), config(sc.M, sc.T)),
                  DimensionError);
}

TEST_CASE("decentralization: keys recomputed in isolation equal the pipeline output") {
  const ScenarioConfig sc;
  const RunConfig rc = small_run(4, 0, false);
  const auto actor_a = random_actor(sc.M, 11), actor_b = random_actor(sc.M, 12);
  const auto run = evaluate_run(actor_a, actor_b, actor_b, synthetic_windows(rc, 5), rc);
  REQUIRE(run.episodes.size() == 4);
  auto windows = synthetic_windows(rc, 5);
  std::optional<double> prev;
  for (const auto& ep : run.episodes) {
    const auto w = windows();
    REQUIRE(w);
    const auto& alice = trace_for(*w, sc.alice_node);
    const auto keys = derive_keys(actor_a, alice, sc.M, sc.T, rc.train.lambda, Owner::alice, prev);
    prev = alice.samples.back();
    REQUIRE(keys.size() == ep.keys_a.size());
    for (std::size_t t = 0; t < keys.size(); ++t) CHECK(keys[t].bits == ep.keys_a[t].bits);
  }
  CHECK_THROWS_AS(derive_keys(random_actor(3, 1), trace_for(*windows(), sc.alice_node), sc.M, sc.T, 0.5, Owner::alice),
                  DimensionError);
}

TEST_CASE("export_keystream: length and order") {
  const ScenarioConfig sc;
  const RunConfig rc = small_run(1, 0, false);
  const auto actor = random_actor(sc.M, 4);
  const auto run = evaluate_run(actor, actor, actor, synthetic_windows(rc, 9), rc);
  REQUIRE(run.episodes.size() == 1);
  const auto bits = export_keystream(run.episodes, Owner::alice);
  CHECK(bits.size() == 380);
  CHECK(BitSequence(bits.begin(), bits.begin() + 20) == run.episodes[0].keys_a[0].bits);
  CHECK(BitSequence(bits.end() - 20, bits.end()) == run.episodes[0].keys_a[18].bits);
  CHECK(export_keystream({}, Owner::alice).empty());
}

TEST_CASE("evaluate_run: stopping rules") {
  const auto actor = random_actor(20, 4);
  SUBCASE("episode count dominates") {
    const auto rc = small_run(30, 10000, false);
    CHECK(evaluate_run(actor, actor, actor, synthetic_windows(rc, 1), rc).episodes.size() == 30);
  }
  SUBCASE("bit floor dominates") {
    const auto rc = small_run(2, 10000, false);
    CHECK(evaluate_run(actor, actor, actor, synthetic_windows(rc, 1), rc).episodes.size() == 27);
  }
  SUBCASE("finite source stops early; empty source is an error") {
    const auto rc = small_run(30, 0, false);
    const auto traces = synth_traces(rc.scenario, rc.synth, 2);
    CHECK(evaluate_run(actor, actor, actor, trace_windows(traces, rc.scenario), rc).episodes.size() == 1);
    const WindowSource empty = [] { return std::optional<TraceSet>{}; };
    CHECK_THROWS_AS(evaluate_run(actor, actor, actor, empty, rc), ConfigError);
  }
  SUBCASE("excursion extension reaches the cycle floor or the cap") {
    auto rc = small_run(1, 0, true);
    rc.eval.min_cycles = 20;
    rc.eval.max_bits = 200000;
    const auto run = evaluate_run(actor, actor, actor, synthetic_windows(rc, 1), rc);
    const auto bits = export_keystream(run.episodes, Owner::alice);
    CHECK((excursion_cycles(bits) >= 20 || bits.size() >= 200000));
  }
}

TEST_CASE("Eve's agreement falls as her signal decorrelates") {
  const auto on = always_on(20);
  auto mean_ae = [&](double decorrelation) {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto rc = small_run(5, 0, false);
      rc.synth.eve_decorrelation = decorrelation;
      total += evaluate_run(on, on, on, synthetic_windows(rc, seed), rc).summary.mean_kar_ae;
    }
    return total / 5;
  };
  const double full = mean_ae(0.0), half = mean_ae(0.5), none = mean_ae(1.0);
  CHECK(full > half);
  CHECK(half > none);
  CHECK(none < 0.65);
}

TEST_CASE("summaries and report formats") {
  const ScenarioConfig sc;
  const RunConfig rc = small_run(3, 0, false);
  const auto actor_a = random_actor(sc.M, 21), actor_b = random_actor(sc.M, 22);
  const auto run = evaluate_run(actor_a, actor_b, actor_b, synthetic_windows(rc, 8), rc);
  const auto& s = run.summary;
  REQUIRE(s.kar_ab.size() == 19);
  double expect = 0.0;
  for (const auto& e : run.episodes) expect += e.kar_ab[4] / 3.0;
  CHECK(s.kar_ab[4] == doctest::Approx(expect));
  CHECK(s.keys_a.empty());
  CHECK(summarize({}).kar_ab.empty());

  const auto j = nlohmann::json::parse(report_json(run, rc));
  CHECK(j.at("episodes") == 3);
  CHECK(j.at("keystream_bits") == 3 * 380);
  CHECK(j.at("per_ts").at("ts").size() == 19);
  CHECK(j.at("per_ts").at("ts")[0] == 1);
  CHECK(j.at("mean_kar_ab").get<double>() == doctest::Approx(s.mean_kar_ab));
  CHECK(j.at("mean_gap").get<double>() == doctest::Approx(s.mean_kar_ab - s.mean_kar_ae));
  for (const char* key : {"min_gap", "mask_utilization", "eve_mask_utilization", "uniqueness_hamming", "lambda"})
    CHECK(j.contains(key));

  const auto csv = report_csv(s);
  CHECK(csv.rfind("ts,kar_ab,kar_ae,gap\n1,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 20);

  fd2k::testing::TempDir dir;
  write_key_lines(dir / "keys_A.txt", run.episodes, Owner::alice);
  std::ifstream in(dir / "keys_A.txt");
  std::string line;
  int lines = 0;
  std::string first;
  while (std::getline(in, line)) {
    if (lines == 0) first = line;
    ++lines;
  }
  CHECK(lines == 57);
  CHECK(first.rfind("A,1,", 0) == 0);
  CHECK(first.size() == 4 + 20);
}
