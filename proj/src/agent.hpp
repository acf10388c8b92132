#pragma once

#include <cstdint>
#include <vector>

#include "keygen.hpp"
#include "nn.hpp"
#include "rng.hpp"

namespace fd2k {

struct AgentOptions {
  int M = 20;
  int hidden_layers = 4;
  int hidden_units = 100;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double noise_scale = 0.4;
  double noise_decay = 0.9995;
  double noise_min = 0.01;
};

std::vector<int> actor_dims(const AgentOptions& options);
// State (2M) followed by joint action (2M) in, scalar value out.
std::vector<int> critic_dims(const AgentOptions& options);

// Transitions stacked column-wise: states/actions/next_states are 2M x n.
struct Batch {
  Matrix states;
  Matrix actions;
  Vector rewards;
  Matrix next_states;
  Vector not_terminal;  // 0 where the transition ended the episode

  Eigen::Index size() const { return rewards.size(); }
};

struct Agent {
  Owner id = Owner::alice;
  int M = 0;
  Mlp actor;
  Mlp critic;
  Mlp target_actor;
  Mlp target_critic;
  AdamState actor_opt;
  AdamState critic_opt;
  double noise_scale = 0.4;
  double noise_decay = 0.9995;
  double noise_min = 0.01;

  // Targets start as copies of the online networks.
  static Agent create(Owner id, Mlp actor, const AgentOptions& options, std::uint64_t critic_seed);

  // 0 for Alice, 1 for Bob: position of this agent's block in joint state/action vectors.
  int slot() const;
};

// Actor output, optionally perturbed by N(0, noise_scale^2) and clamped to [0, 1].
Vector act(const Agent& agent, const Vector& observation, bool explore, Rng& rng);

void decay_noise(Agent& agent);

// a' for the critic targets: each target actor applied to its own block of s'.
Matrix next_joint_actions(const Agent& alice, const Agent& bob, const Matrix& next_states);

// One Adam step on the mean squared TD error; returns the loss before the step.
double update_critic(Agent& agent, const Batch& batch, const Matrix& next_actions, double gamma);

// One Adam step ascending mean Q with this agent's action slot replaced by its current
// actor output; the peer slot keeps the stored batch action. Returns mean Q before the step.
double update_actor(Agent& agent, const Batch& batch);

// Gradient of -mean Q with respect to the actor parameters (no step taken).
Gradients actor_objective_gradient(const Agent& agent, const Batch& batch, double* objective = nullptr);

void sync_targets(Agent& agent, double rho);

}  // namespace fd2k
