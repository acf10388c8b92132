#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "agent.hpp"
#include "keygen.hpp"
#include "signal.hpp"

namespace fd2k {

// Defaults for every training hyperparameter.
struct TrainConfig {
  int M = 20;
  int T = 19;
  double gamma = 0.99;
  int batch_size = 128;         // n
  int memory_capacity = 10000;  // N
  int max_epochs = 3000;        // e_max
  double epsilon = 0.4;         // initial exploration noise std
  double rho = 0.01;
  int federated_interval = 5;  // E
  double lambda = 0.5;

  double noise_decay = 0.9995;
  double noise_min = 0.01;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  int hidden_layers = 4;
  int hidden_units = 100;

  void validate() const;
  AgentOptions agent_options() const;
};

struct EnvState {
  int t = 1;
  bool terminal = false;
  Vector obs_a;
  Vector obs_b;

  // s_t = o_A || o_B
  Vector state() const;
};

struct Transition {
  Vector s;  // 2M
  Vector a;  // a_A || a_B
  double r = 0.0;
  Vector s_next;
  bool terminal = false;
};

struct StepOutcome {
  Transition transition;
  EnvState next;
  FeatureMask mask_a;
  FeatureMask mask_b;
  Key key_a;
  Key key_b;
  double kar = 0.0;
};

// Alice/Bob observation source for one episode. Observations are frames scaled by
// each node's own min/max over the episode trace.
class Environment {
 public:
  Environment(PressureTrace alice, PressureTrace bob, const TrainConfig& config);

  EnvState reset() const;
  StepOutcome step(const EnvState& state, const Vector& action_a, const Vector& action_b) const;

  int M() const { return M_; }
  int T() const { return T_; }
  const PressureTrace& alice_trace() const { return alice_; }
  const PressureTrace& bob_trace() const { return bob_; }

 private:
  Vector observation(const PressureTrace& trace, const NormalizationStats& stats, int t) const;

  PressureTrace alice_;
  PressureTrace bob_;
  NormalizationStats alice_stats_;
  NormalizationStats bob_stats_;
  int M_;
  int T_;
  double lambda_;
};

class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(Transition transition);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t pushed() const { return pushed_; }

  // i = 0 is the oldest retained transition.
  const Transition& at(std::size_t i) const;

  // n distinct positions (oldest-first indexing), uniform without replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;
  Batch sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;  // slot of the oldest item once full
  std::uint64_t pushed_ = 0;
};

Batch make_batch(const std::vector<const Transition*>& transitions);

struct EpochMetrics {
  std::int64_t epoch = 0;
  double accumulated_reward = 0.0;  // sum of r_t over the episode
  double mean_reward = 0.0;         // accumulated_reward / T
  double mean_kar = 0.0;
  double mask_utilization = 0.0;
  double noise_scale = 0.0;
  double critic_loss = 0.0;  // mean over updates in this epoch, 0 if none
  int updates = 0;
  bool aggregated = false;
};

// One episode of exploration with an update after every step once the memory holds n
// transitions.
EpochMetrics train_epoch(std::array<Agent, 2>& agents, const Environment& env, ReplayMemory& memory,
                         const TrainConfig& config, Rng& rng);

}  // namespace fd2k
