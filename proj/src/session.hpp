#pragma once

#include <array>
#include <filesystem>
#include <memory>

#include "config.hpp"
#include "federated.hpp"
#include "marl_env.hpp"

namespace fd2k {

// Training traces named by the config: the trace file when given, else synthesized.
TraceSet training_traces(const RunConfig& config);

// The full training loop: Alice and Bob learning on one environment, with a federated
// round at the end of every E-th epoch.
class Trainer {
 public:
  Trainer(RunConfig config, const TraceSet& traces);

  // Runs epoch() + 1.
  EpochMetrics run_epoch();

  std::int64_t epoch() const { return epoch_; }
  const RunConfig& config() const { return config_; }
  const std::array<Agent, 2>& agents() const { return agents_; }
  const ControllerState& controller() const { return controller_; }
  const ReplayMemory& memory() const { return memory_; }
  const Environment& environment() const { return env_; }

  void set_exchange(std::unique_ptr<ModelExchange> exchange) { exchange_ = std::move(exchange); }

  // Networks, optimiser moments, noise scales, counters and RNG state. The replay
  // memory is not persisted; it refills after a resume.
  void save_checkpoint(const std::filesystem::path& dir) const;
  void load_checkpoint(const std::filesystem::path& dir);

  // actor_A.bin, actor_B.bin, critic_A.bin, critic_B.bin, global_actor.bin
  void save_models(const std::filesystem::path& dir) const;

 private:
  RunConfig config_;
  Environment env_;
  std::array<Agent, 2> agents_;
  ControllerState controller_;
  ReplayMemory memory_;
  Rng rng_;
  std::int64_t epoch_ = 0;
  std::unique_ptr<ModelExchange> exchange_;
};

}  // namespace fd2k
