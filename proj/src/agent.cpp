#include "agent.hpp"

#include <algorithm>

#include "errors.hpp"

namespace fd2k {

std::vector<int> actor_dims(const AgentOptions& options) {
  std::vector<int> dims{options.M};
  for (int i = 0; i < options.hidden_layers; ++i) dims.push_back(options.hidden_units);
  dims.push_back(options.M);
  return dims;
}

std::vector<int> critic_dims(const AgentOptions& options) {
  std::vector<int> dims{4 * options.M};
  for (int i = 0; i < options.hidden_layers; ++i) dims.push_back(options.hidden_units);
  dims.push_back(1);
  return dims;
}

Agent Agent::create(Owner id, Mlp actor, const AgentOptions& options, std::uint64_t critic_seed) {
  if (actor.dims() != actor_dims(options) || actor.output_activation() != Activation::sigmoid)
    throw DimensionError("agent: actor must map M -> M with sigmoid output");
  if (id == Owner::eve) throw ConfigError("agent: only Alice and Bob train");
  Agent a;
  a.id = id;
  a.M = options.M;
  a.actor = std::move(actor);
  a.critic = Mlp::init(critic_dims(options), Activation::linear, critic_seed);
  a.target_actor = a.actor;
  a.target_critic = a.critic;
  a.actor_opt = AdamState::for_net(a.actor, options.actor_lr);
  a.critic_opt = AdamState::for_net(a.critic, options.critic_lr);
  a.noise_scale = options.noise_scale;
  a.noise_decay = options.noise_decay;
  a.noise_min = options.noise_min;
  return a;
}

int Agent::slot() const { return id == Owner::alice ? 0 : 1; }

Vector act(const Agent& agent, const Vector& observation, bool explore, Rng& rng) {
  if (observation.size() != agent.M)
    throw DimensionError("act: observation length " + std::to_string(observation.size()) + ", expected " +
                         std::to_string(agent.M));
  Vector action = predict(agent.actor, observation);
  if (explore && agent.noise_scale > 0.0) {
    std::normal_distribution<double> noise(0.0, agent.noise_scale);
    for (Eigen::Index m = 0; m < action.size(); ++m) action(m) = std::clamp(action(m) + noise(rng), 0.0, 1.0);
  }
  return action;
}

void decay_noise(Agent& agent) {
  agent.noise_scale = std::max(agent.noise_scale * agent.noise_decay, agent.noise_min);
}

Matrix next_joint_actions(const Agent& alice, const Agent& bob, const Matrix& next_states) {
  const int M = alice.M;
  if (next_states.rows() != 2 * M) throw DimensionError("next_joint_actions: states must have 2M rows");
  Matrix joint(2 * M, next_states.cols());
  joint.topRows(M) = forward(alice.target_actor, next_states.topRows(M)).output;
  joint.bottomRows(M) = forward(bob.target_actor, next_states.bottomRows(M)).output;
  return joint;
}

namespace {

Matrix critic_input(const Matrix& states, const Matrix& actions) {
  Matrix input(states.rows() + actions.rows(), states.cols());
  input.topRows(states.rows()) = states;
  input.bottomRows(actions.rows()) = actions;
  return input;
}

void check_batch(const Agent& agent, const Batch& batch) {
  const auto n = batch.size();
  if (n < 1) throw DimensionError("batch must hold at least one transition");
  const auto rows = 2 * agent.M;
  if (batch.states.rows() != rows || batch.actions.rows() != rows || batch.next_states.rows() != rows)
    throw DimensionError("batch: states and actions must have 2M rows");
  if (batch.states.cols() != n || batch.actions.cols() != n || batch.next_states.cols() != n ||
      batch.not_terminal.size() != n)
    throw DimensionError("batch: inconsistent sample counts");
}

}  // namespace

double update_critic(Agent& agent, const Batch& batch, const Matrix& next_actions, double gamma) {
  check_batch(agent, batch);
  const auto n = batch.size();
  if (next_actions.rows() != 2 * agent.M || next_actions.cols() != n)
    throw DimensionError("update_critic: next joint actions must be 2M x n");

  const Matrix target_q = forward(agent.target_critic, critic_input(batch.next_states, next_actions)).output;
  const Vector y = batch.rewards + gamma * batch.not_terminal.cwiseProduct(target_q.row(0).transpose());
  if (!y.allFinite()) throw NumericError("update_critic: non-finite TD target");

  auto fwd = forward(agent.critic, critic_input(batch.states, batch.actions));
  const Vector residual = y - fwd.output.row(0).transpose();
  const double loss = residual.squaredNorm() / static_cast<double>(n);

  // d loss / d Q = -2 (y - Q) / n
  Matrix grad_out = (-2.0 / static_cast<double>(n)) * residual.transpose();
  auto back = backward(agent.critic, fwd.cache, grad_out);
  adam_step(agent.critic, back.grads, agent.critic_opt);
  return loss;
}

Gradients actor_objective_gradient(const Agent& agent, const Batch& batch, double* objective) {
  check_batch(agent, batch);
  const auto n = batch.size();
  const int M = agent.M;
  const int offset = agent.slot() * M;

  auto actor_fwd = forward(agent.actor, batch.states.middleRows(offset, M));
  Matrix joint = batch.actions;
  joint.middleRows(offset, M) = actor_fwd.output;

  auto critic_fwd = forward(agent.critic, critic_input(batch.states, joint));
  if (objective) *objective = critic_fwd.output.mean();

  // Minimise -mean Q: seed the critic with -1/n and read back d/d(own action).
  Matrix seed = Matrix::Constant(1, n, -1.0 / static_cast<double>(n));
  auto critic_back = backward(agent.critic, critic_fwd.cache, seed);
  const Matrix action_grad = critic_back.input_gradient.middleRows(2 * M + offset, M);
  return backward(agent.actor, actor_fwd.cache, action_grad).grads;
}

double update_actor(Agent& agent, const Batch& batch) {
  double objective = 0.0;
  auto grads = actor_objective_gradient(agent, batch, &objective);
  adam_step(agent.actor, grads, agent.actor_opt);
  return objective;
}

void sync_targets(Agent& agent, double rho) {
  soft_update(agent.target_actor, agent.actor, rho);
  soft_update(agent.target_critic, agent.critic, rho);
}

}  // namespace fd2k
