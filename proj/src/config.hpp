#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "marl_env.hpp"
#include "signal.hpp"

namespace fd2k {

struct EvalOptions {
  int episodes = 30;                      // consecutive evaluation windows of T*M samples
  std::size_t min_bits = 10000;           // keystream floor per owner
  bool extend_for_excursions = true;      // keep adding windows until the excursion tests apply
  std::size_t max_bits = 4'000'000;       // hard cap on the extension
  int min_cycles = 500;
};

struct RunConfig {
  TrainConfig train;
  ScenarioConfig scenario;
  SynthParams synth;
  EvalOptions eval;
  std::uint64_t seed = 1;
  std::string output_dir = "fd2k_out";
  std::string federated_dir;  // empty: in-process exchange
  std::string trace_file;     // empty: synthesize the training trace
  int checkpoint_every = 0;   // epochs; 0 means every federated round

  void validate() const;
  int checkpoint_interval() const { return checkpoint_every > 0 ? checkpoint_every : train.federated_interval; }

  // Dotted key ("M", "synth.sigma_local", "scenario.alice_node"); value is a TOML literal
  // or bare text.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static std::vector<std::string> keys();

  std::string to_toml() const;
  static RunConfig from_toml(const std::string& text, const std::string& origin = "<string>");
  static RunConfig load(const std::filesystem::path& path);

  // Applies TOML text on top of this configuration.
  void merge_toml(const std::string& text, const std::string& origin);
};

}  // namespace fd2k
