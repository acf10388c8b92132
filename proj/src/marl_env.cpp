#include "marl_env.hpp"

#include <numeric>

#include "errors.hpp"

namespace fd2k {

void TrainConfig::validate() const {
  if (M < 2) throw ConfigError("M must be >= 2");
  if (T < 1) throw ConfigError("T must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (batch_size < 1) throw ConfigError("n must be >= 1");
  if (memory_capacity < 1) throw ConfigError("N_mem must be >= 1");
  if (batch_size > memory_capacity) throw ConfigError("n must not exceed N_mem");
  if (max_epochs < 0) throw ConfigError("e_max must be >= 0");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
  if (federated_interval < 1) throw ConfigError("E must be >= 1");
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in (0, 1)");
  if (!(noise_decay > 0.0 && noise_decay <= 1.0)) throw ConfigError("noise_decay must lie in (0, 1]");
  if (!(noise_min >= 0.0)) throw ConfigError("noise_min must be >= 0");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (hidden_layers < 0 || hidden_units < 1) throw ConfigError("invalid hidden layer shape");
}

AgentOptions TrainConfig::agent_options() const {
  AgentOptions o;
  o.M = M;
  o.hidden_layers = hidden_layers;
  o.hidden_units = hidden_units;
  o.actor_lr = actor_lr;
  o.critic_lr = critic_lr;
  o.noise_scale = epsilon;
  o.noise_decay = noise_decay;
  o.noise_min = noise_min;
  return o;
}

Vector EnvState::state() const {
  Vector s(obs_a.size() + obs_b.size());
  s << obs_a, obs_b;
  return s;
}

Environment::Environment(PressureTrace alice, PressureTrace bob, const TrainConfig& config)
    : alice_(std::move(alice)), bob_(std::move(bob)), M_(config.M), T_(config.T), lambda_(config.lambda) {
  const auto needed = static_cast<std::size_t>(M_) * static_cast<std::size_t>(T_);
  if (alice_.samples.size() < needed || bob_.samples.size() < needed)
    throw ConfigError("environment: traces hold fewer than T*M samples");
  alice_stats_ = compute_stats(alice_);
  bob_stats_ = compute_stats(bob_);
}

Vector Environment::observation(const PressureTrace& trace, const NormalizationStats& stats, int t) const {
  auto values = normalize(frame(trace, t, M_), stats);
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

EnvState Environment::reset() const {
  return EnvState{1, false, observation(alice_, alice_stats_, 1), observation(bob_, bob_stats_, 1)};
}

StepOutcome Environment::step(const EnvState& state, const Vector& action_a, const Vector& action_b) const {
  if (state.terminal) throw RangeError("step: episode already terminated");
  if (state.t < 1 || state.t > T_) throw RangeError("step: t outside [1, T]");
  if (action_a.size() != M_ || action_b.size() != M_) throw DimensionError("step: actions must have length M");

  const int t = state.t;
  const auto frame_a = frame(alice_, t, M_);
  const auto frame_b = frame(bob_, t, M_);
  std::optional<double> prev_a, prev_b;
  if (t > 1) {
    const auto last = static_cast<std::size_t>(t - 1) * M_ - 1;
    prev_a = alice_.samples[last];
    prev_b = bob_.samples[last];
  }

  StepOutcome out;
  out.mask_a = binarize(std::span<const double>(action_a.data(), action_a.size()), lambda_);
  out.mask_b = binarize(std::span<const double>(action_b.data(), action_b.size()), lambda_);
  out.key_a = generate_key(frame_a, out.mask_a, prev_a, Owner::alice);
  out.key_b = generate_key(frame_b, out.mask_b, prev_b, Owner::bob);
  out.kar = kar(out.key_a, out.key_b);

  auto& tr = out.transition;
  tr.s = state.state();
  tr.a.resize(2 * M_);
  tr.a << action_a, action_b;
  tr.r = reward(out.key_a, out.key_b, out.mask_a, out.mask_b);
  tr.terminal = t == T_;
  if (tr.terminal) {
    out.next = EnvState{t, true, state.obs_a, state.obs_b};
    tr.s_next = tr.s;
  } else {
    out.next = EnvState{t + 1, false, observation(alice_, alice_stats_, t + 1), observation(bob_, bob_stats_, t + 1)};
    tr.s_next = out.next.state();
  }
  return out;
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay memory capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayMemory::push(Transition transition) {
  if (!std::isfinite(transition.r)) throw NumericError("replay: non-finite reward");
  if (items_.size() < capacity_) {
    items_.push_back(std::move(transition));
  } else {
    items_[head_] = std::move(transition);
    head_ = (head_ + 1) % capacity_;
  }
  ++pushed_;
}

const Transition& ReplayMemory::at(std::size_t i) const {
  if (i >= items_.size()) throw RangeError("replay: index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayMemory::sample_indices(std::size_t n, Rng& rng) const {
  if (n > items_.size())
    throw RangeError("replay: cannot sample " + std::to_string(n) + " from " + std::to_string(items_.size()));
  std::vector<std::size_t> idx(items_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first n slots end up a uniform draw without replacement.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

Batch ReplayMemory::sample(std::size_t n, Rng& rng) const {
  std::vector<const Transition*> chosen;
  chosen.reserve(n);
  for (auto i : sample_indices(n, rng)) chosen.push_back(&at(i));
  return make_batch(chosen);
}

Batch make_batch(const std::vector<const Transition*>& transitions) {
  if (transitions.empty()) throw RangeError("make_batch: empty");
  const auto rows = transitions.front()->s.size();
  const auto n = static_cast<Eigen::Index>(transitions.size());
  Batch b;
  b.states.resize(rows, n);
  b.actions.resize(rows, n);
  b.next_states.resize(rows, n);
  b.rewards.resize(n);
  b.not_terminal.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& tr = *transitions[static_cast<std::size_t>(j)];
    b.states.col(j) = tr.s;
    b.actions.col(j) = tr.a;
    b.next_states.col(j) = tr.s_next;
    b.rewards(j) = tr.r;
    b.not_terminal(j) = tr.terminal ? 0.0 : 1.0;
  }
  return b;
}

EpochMetrics train_epoch(std::array<Agent, 2>& agents, const Environment& env, ReplayMemory& memory,
                         const TrainConfig& config, Rng& rng) {
  auto& alice = agents[0];
  auto& bob = agents[1];
  EpochMetrics metrics;
  double kar_sum = 0.0;
  double util_sum = 0.0;
  double loss_sum = 0.0;

  EnvState state = env.reset();
  for (int t = 1; t <= env.T(); ++t) {
    const Vector a_A = act(alice, state.obs_a, true, rng);
    const Vector a_B = act(bob, state.obs_b, true, rng);
    auto outcome = env.step(state, a_A, a_B);

    metrics.accumulated_reward += outcome.transition.r;
    kar_sum += outcome.kar;
    util_sum += mask_utilization(outcome.mask_a, outcome.mask_b);
    memory.push(outcome.transition);
    state = std::move(outcome.next);

    if (memory.size() >= static_cast<std::size_t>(config.batch_size)) {
      const Batch batch = memory.sample(static_cast<std::size_t>(config.batch_size), rng);
      const Matrix next_actions = next_joint_actions(alice, bob, batch.next_states);
      loss_sum += update_critic(alice, batch, next_actions, config.gamma);
      loss_sum += update_critic(bob, batch, next_actions, config.gamma);
      update_actor(alice, batch);
      update_actor(bob, batch);
      sync_targets(alice, config.rho);
      sync_targets(bob, config.rho);
      ++metrics.updates;
    }
    decay_noise(alice);
    decay_noise(bob);
  }

  const double T = static_cast<double>(env.T());
  metrics.mean_reward = metrics.accumulated_reward / T;
  metrics.mean_kar = kar_sum / T;
  metrics.mask_utilization = util_sum / T;
  metrics.noise_scale = alice.noise_scale;
  metrics.critic_loss = metrics.updates > 0 ? loss_sum / (2.0 * metrics.updates) : 0.0;
  return metrics;
}

}  // namespace fd2k
