#include <doctest.h>

#include <cmath>

#include "agent.hpp"
#include "errors.hpp"
#include "support.hpp"

using namespace fd2k;

namespace {

AgentOptions small_options(int M, int layers = 1, int units = 6) {
  AgentOptions o;
  o.M = M;
  o.hidden_layers = layers;
  o.hidden_units = units;
  return o;
}

Agent make_agent(Owner id, const AgentOptions& o, std::uint64_t seed) {
  return Agent::create(id, Mlp::init(actor_dims(o), Activation::sigmoid, seed), o, seed + 100);
}

Batch random_batch(std::mt19937_64& rng, int M, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Batch b;
  b.states = Matrix(2 * M, n);
  b.actions = Matrix(2 * M, n);
  b.next_states = Matrix(2 * M, n);
  b.rewards = Vector(n);
  b.not_terminal = Vector::Ones(n);
  for (Eigen::Index i = 0; i < b.states.size(); ++i) {
    b.states.data()[i] = u(rng);
    b.actions.data()[i] = u(rng);
    b.next_states.data()[i] = u(rng);
  }
  for (int i = 0; i < n; ++i) b.rewards(i) = 2.0 * u(rng);
  b.not_terminal(n - 1) = 0.0;
  return b;
}

}  // namespace

TEST_CASE("create: network shapes and initial targets") {
  const auto o = small_options(3, 2, 5);
  CHECK(actor_dims(o) == std::vector<int>{3, 5, 5, 3});
  CHECK(critic_dims(o) == std::vector<int>{12, 5, 5, 1});
  const auto a = make_agent(Owner::bob, o, 1);
  CHECK(a.slot() == 1);
  CHECK(a.critic.output_activation() == Activation::linear);
  CHECK(a.target_actor.parameters_equal(a.actor));
  CHECK(a.target_critic.parameters_equal(a.critic));
  CHECK(a.noise_scale == 0.4);
  CHECK_THROWS_AS(Agent::create(Owner::alice, Mlp::init({3, 4}, Activation::sigmoid, 1), o, 2), DimensionError);
  CHECK_THROWS_AS(Agent::create(Owner::alice, Mlp::init(actor_dims(o), Activation::linear, 1), o, 2),
                  DimensionError);
  CHECK_THROWS_AS(make_agent(Owner::eve, o, 1), ConfigError);
}

TEST_CASE("act: deterministic without exploration, clamped with it") {
  const auto o = small_options(4);
  Agent a = Agent::create(Owner::alice, Mlp(actor_dims(o), Activation::sigmoid), o, 1);
  Rng rng(1);
  const Vector obs = Vector::Constant(4, 0.3);
  const Vector plain = act(a, obs, false, rng);
  CHECK(plain.isApprox(Vector::Constant(4, 0.5)));

  a.noise_scale = 0.0;
  CHECK(act(a, obs, true, rng) == plain);

  a.noise_scale = 10.0;
  for (int k = 0; k < 1000; ++k) {
    const auto v = act(a, obs, true, rng);
    CHECK((v.array() >= 0.0).all());
    CHECK((v.array() <= 1.0).all());
  }
  CHECK_THROWS_AS(act(a, Vector::Zero(3), false, rng), DimensionError);
}

TEST_CASE("decay_noise") {
  Agent a;
  a.noise_scale = 0.4;
  a.noise_decay = 0.999;
  a.noise_min = 0.01;
  decay_noise(a);
  CHECK(a.noise_scale == doctest::Approx(0.3996).epsilon(1e-15));
  for (int k = 1; k < 10; ++k) decay_noise(a);
  CHECK(a.noise_scale == doctest::Approx(0.4 * std::pow(0.999, 10)).epsilon(1e-12));
  a.noise_scale = 0.01;
  decay_noise(a);
  CHECK(a.noise_scale == 0.01);
}

TEST_CASE("update_critic: zero residual gives zero loss and leaves parameters unchanged") {
  const int M = 2;
  auto o = small_options(M, 0);
  Agent a = make_agent(Owner::alice, o, 3);
  // Critic Q(s, a) = b; rewards all equal b, gamma = 0.
  a.critic = Mlp(critic_dims(o), Activation::linear);
  a.critic.mutable_params().biases[0](0) = 0.7;
  a.critic_opt = AdamState::for_net(a.critic, 1e-3);
  std::mt19937_64 rng(1);
  auto batch = random_batch(rng, M, 5);
  batch.rewards.setConstant(0.7);
  const auto before = a.critic;
  const double loss = update_critic(a, batch, batch.actions, 0.0);
  CHECK(loss == 0.0);
  CHECK(a.critic.parameters_equal(before));
}

TEST_CASE("update_critic: single sample matches by-hand TD loss and gradient step") {
  const int M = 1;
  auto o = small_options(M, 0);
  o.critic_lr = 0.1;
  Agent a = make_agent(Owner::alice, o, 3);
  a.critic = Mlp(critic_dims(o), Activation::linear);
  a.critic.mutable_params().weights[0] << 0.5, -1.0, 2.0, 0.25;
  a.critic.mutable_params().biases[0](0) = 0.1;
  a.target_critic = Mlp(critic_dims(o), Activation::linear);
  a.target_critic.mutable_params().weights[0] << 1.0, 1.0, 1.0, 1.0;
  a.critic_opt = AdamState::for_net(a.critic, 0.1);

  Batch b;
  b.states = Matrix(2, 1);
  b.states << 0.2, 0.4;
  b.actions = Matrix(2, 1);
  b.actions << 0.6, 0.8;
  b.next_states = Matrix(2, 1);
  b.next_states << 0.3, 0.5;
  b.rewards = Vector::Constant(1, 1.5);
  b.not_terminal = Vector::Ones(1);
  Matrix next_a(2, 1);
  next_a << 0.9, 0.1;

  const double q = 0.5 * 0.2 - 1.0 * 0.4 + 2.0 * 0.6 + 0.25 * 0.8 + 0.1;
  const double q_next = 0.3 + 0.5 + 0.9 + 0.1;
  const double y = 1.5 + 0.9 * q_next;
  CHECK(update_critic(a, b, next_a, 0.9) == doctest::Approx((y - q) * (y - q)).epsilon(1e-14));
  // First Adam step moves each parameter by -lr * sign(gradient); d/dw = -2 (y - q) x.
  const double sign = (y - q) > 0 ? 1.0 : -1.0;
  CHECK(a.critic.params().weights[0](0, 0) == doctest::Approx(0.5 + 0.1 * sign).epsilon(1e-7));
  CHECK(a.critic.params().biases[0](0) == doctest::Approx(0.1 + 0.1 * sign).epsilon(1e-7));

  // Terminal transitions drop the bootstrap.
  b.not_terminal(0) = 0.0;
  Agent c = make_agent(Owner::alice, o, 3);
  c.critic = Mlp(critic_dims(o), Activation::linear);
  c.critic_opt = AdamState::for_net(c.critic, 0.1);
  c.target_critic = a.target_critic;
  CHECK(update_critic(c, b, next_a, 0.9) == doctest::Approx(1.5 * 1.5));
}

TEST_CASE("update_critic: loss is non-negative and decreases on a frozen batch") {
  const int M = 2;
  const auto o = small_options(M, 2, 8);
  Agent a = make_agent(Owner::alice, o, 5);
  std::mt19937_64 rng(7);
  const auto batch = random_batch(rng, M, 16);
  const Matrix next = batch.actions;
  std::vector<double> losses;
  for (int k = 0; k < 100; ++k) {
    losses.push_back(update_critic(a, batch, next, 0.0));
    CHECK(losses.back() >= 0.0);
  }
  CHECK(losses.back() < 0.5 * losses.front());
  CHECK_THROWS_AS(update_critic(a, batch, Matrix::Zero(2 * M, 3), 0.9), DimensionError);
  auto bad = batch;
  bad.rewards(0) = std::nan("");
  CHECK_THROWS_AS(update_critic(a, bad, next, 0.9), NumericError);
}

TEST_CASE("update_actor: constant critic leaves the actor unchanged") {
  const int M = 2;
  const auto o = small_options(M);
  Agent a = make_agent(Owner::bob, o, 2);
  a.critic = Mlp(critic_dims(o), Activation::linear);
  std::mt19937_64 rng(2);
  const auto batch = random_batch(rng, M, 8);
  const auto before = a.actor;
  const auto g = actor_objective_gradient(a, batch);
  for (std::size_t l = 0; l < g.weights.size(); ++l) CHECK(g.weights[l].isZero(0.0));
  update_actor(a, batch);
  CHECK(a.actor.parameters_equal(before));
}

TEST_CASE("update_actor: with Q = own action the actor output increases") {
  const int M = 1;
  auto o = small_options(M, 1, 4);
  for (Owner id : {Owner::alice, Owner::bob}) {
    Agent a = make_agent(id, o, 9);
    a.critic = Mlp(critic_dims(o), Activation::linear);
    a.critic = Mlp({4, 1}, Activation::linear);
    // Input layout: s_A, s_B, a_A, a_B.
    a.critic.mutable_params().weights[0](0, 2 + a.slot()) = 1.0;
    std::mt19937_64 rng(4);
    const auto batch = random_batch(rng, M, 8);
    const Vector obs = batch.states.row(a.slot()).transpose();
    double before = 0.0;
    for (Eigen::Index i = 0; i < obs.size(); ++i) before += predict(a.actor, Vector::Constant(1, obs(i)))(0);
    for (int k = 0; k < 20; ++k) update_actor(a, batch);
    double after = 0.0;
    for (Eigen::Index i = 0; i < obs.size(); ++i) after += predict(a.actor, Vector::Constant(1, obs(i)))(0);
    CHECK(after > before);
  }
}

TEST_CASE("update_actor: gradient matches finite differences of mean Q; peer slot uses stored actions") {
  const int M = 2;
  const auto o = small_options(M, 1, 5);
  for (Owner id : {Owner::alice, Owner::bob}) {
    Agent a = make_agent(id, o, 11);
    std::mt19937_64 rng(12);
    for (auto& w : a.critic.mutable_params().weights) w = fd2k::testing::random_matrix(rng, w.rows(), w.cols());
    const auto batch = random_batch(rng, M, 6);
    const int off = a.slot() * M;

    auto mean_q = [&](const Mlp& actor) {
      Matrix joint = batch.actions;
      joint.middleRows(off, M) = forward(actor, batch.states.middleRows(off, M)).output;
      Matrix in(4 * M, batch.size());
      in << batch.states, joint;
      return forward(a.critic, in).output.mean();
    };
    double objective = 0.0;
    const auto g = actor_objective_gradient(a, batch, &objective);
    CHECK(objective == doctest::Approx(mean_q(a.actor)).epsilon(1e-14));

    std::vector<double> analytic, numeric;
    const double h = 1e-6;
    for (std::size_t l = 0; l < a.actor.layer_count(); ++l) {
      for (Eigen::Index i = 0; i < a.actor.params().weights[l].size(); ++i) {
        Mlp up = a.actor, down = a.actor;
        up.mutable_params().weights[l].data()[i] += h;
        down.mutable_params().weights[l].data()[i] -= h;
        // Gradient of -mean Q.
        numeric.push_back(-(mean_q(up) - mean_q(down)) / (2 * h));
        analytic.push_back(g.weights[l].data()[i]);
      }
    }
    CHECK(fd2k::testing::relative_error(analytic, numeric) <= 1e-3);
  }
}

TEST_CASE("sync_targets follows soft_update and stays in the convex hull") {
  const auto o = small_options(2);
  Agent a = make_agent(Owner::alice, o, 1);
  const auto t0 = a.target_actor;
  std::mt19937_64 rng(3);
  std::vector<Mlp> history{a.actor};
  for (int k = 0; k < 5; ++k) {
    for (auto& w : a.actor.mutable_params().weights) w = fd2k::testing::random_matrix(rng, w.rows(), w.cols());
    history.push_back(a.actor);
    sync_targets(a, 0.2);
  }
  for (std::size_t l = 0; l < a.actor.layer_count(); ++l) {
    const auto& w = a.target_actor.params().weights[l];
    Matrix lo = history[0].params().weights[l], hi = lo;
    for (const auto& h : history) {
      lo = lo.cwiseMin(h.params().weights[l]);
      hi = hi.cwiseMax(h.params().weights[l]);
    }
    CHECK(((w.array() >= lo.array() - 1e-12) && (w.array() <= hi.array() + 1e-12)).all());
  }
  Agent b = make_agent(Owner::alice, o, 1);
  auto moved = b.actor;
  for (auto& w : moved.mutable_params().weights) w.setConstant(1.0);
  b.actor = moved;
  sync_targets(b, 1.0);
  CHECK(b.target_actor.parameters_equal(moved));
  sync_targets(b, 0.0);
  CHECK(b.target_actor.parameters_equal(moved));
}

TEST_CASE("next_joint_actions uses the target actors on each block") {
  const auto o = small_options(2);
  Agent a = make_agent(Owner::alice, o, 1), b = make_agent(Owner::bob, o, 2);
  for (auto& w : a.actor.mutable_params().weights) w.setConstant(3.0);
  std::mt19937_64 rng(1);
  const auto s = fd2k::testing::random_matrix(rng, 4, 3);
  const auto j = next_joint_actions(a, b, s);
  CHECK(j.topRows(2).isApprox(forward(a.target_actor, s.topRows(2)).output));
  CHECK(j.bottomRows(2).isApprox(forward(b.target_actor, s.bottomRows(2)).output));
  CHECK_THROWS_AS(next_joint_actions(a, b, Matrix::Zero(3, 1)), DimensionError);
}
