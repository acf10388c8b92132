#include "session.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"

namespace fd2k {

TraceSet training_traces(const RunConfig& config) {
  if (!config.trace_file.empty()) return load_traces(config.trace_file, config.scenario);
  return synth_traces(config.scenario, config.synth, derive_seed(config.seed, SeedStream::synth));
}

namespace {

Environment make_env(const RunConfig& config, const TraceSet& traces) {
  config.validate();
  return Environment(trace_for(traces, config.scenario.alice_node), trace_for(traces, config.scenario.bob_node),
                     config.train);
}

const char* tag(Owner o) { return o == Owner::alice ? "A" : "B"; }

}  // namespace

Trainer::Trainer(RunConfig config, const TraceSet& traces)
    : config_(std::move(config)),
      env_(make_env(config_, traces)),
      memory_(static_cast<std::size_t>(config_.train.memory_capacity)),
      rng_(derive_seed(config_.seed, SeedStream::training)) {
  const auto options = config_.train.agent_options();
  const auto init_seed = derive_seed(config_.seed, SeedStream::init);
  auto dist = init_and_distribute(init_seed, actor_dims(options), config_.train.federated_interval);
  controller_ = std::move(dist.controller);
  agents_[0] = Agent::create(Owner::alice, std::move(dist.actor_a), options, splitmix64(init_seed + 1));
  agents_[1] = Agent::create(Owner::bob, std::move(dist.actor_b), options, splitmix64(init_seed + 2));
  if (config_.federated_dir.empty()) exchange_ = std::make_unique<InProcessExchange>();
  else exchange_ = std::make_unique<SpoolDirectoryExchange>(config_.federated_dir);
}

EpochMetrics Trainer::run_epoch() {
  auto metrics = train_epoch(agents_, env_, memory_, config_.train, rng_);
  ++epoch_;
  metrics.epoch = epoch_;
  if (should_aggregate(epoch_, config_.train.federated_interval)) {
    federated_round(controller_, agents_[0], agents_[1], *exchange_);
    metrics.aggregated = true;
  }
  return metrics;
}

void Trainer::save_checkpoint(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json state;
  state["format"] = "fd2k-checkpoint-1";
  state["epoch"] = epoch_;
  state["round"] = controller_.round;
  std::ostringstream rng_text;
  rng_text << rng_;
  state["rng"] = rng_text.str();
  for (const auto& a : agents_) {
    const std::string t = tag(a.id);
    save_model(dir / ("actor_" + t + ".bin"), a.actor);
    save_model(dir / ("critic_" + t + ".bin"), a.critic);
    save_model(dir / ("target_actor_" + t + ".bin"), a.target_actor);
    save_model(dir / ("target_critic_" + t + ".bin"), a.target_critic);
    write_file_bytes(dir / ("actor_adam_m_" + t + ".bin"), serialize_parameters(a.actor_opt.first_moment, a.actor));
    write_file_bytes(dir / ("actor_adam_v_" + t + ".bin"), serialize_parameters(a.actor_opt.second_moment, a.actor));
    write_file_bytes(dir / ("critic_adam_m_" + t + ".bin"), serialize_parameters(a.critic_opt.first_moment, a.critic));
    write_file_bytes(dir / ("critic_adam_v_" + t + ".bin"), serialize_parameters(a.critic_opt.second_moment, a.critic));
    state["agents"][t] = {{"noise_scale", a.noise_scale},
                          {"actor_adam_step", a.actor_opt.step},
                          {"critic_adam_step", a.critic_opt.step}};
  }
  save_model(dir / "global_actor.bin", controller_.global_actor);
  std::ofstream out(dir / "state.json");
  out << state.dump(2) << "\n";
  if (!out) throw IoError("failed writing checkpoint state in " + dir.string());
}

void Trainer::load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "state.json");
  if (!in) throw IoError("no checkpoint state in " + dir.string());
  nlohmann::json state;
  try {
    in >> state;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint state: ") + e.what());
  }
  if (state.value("format", "") != "fd2k-checkpoint-1") throw FormatError("checkpoint state: unknown format");

  auto agents = agents_;
  for (auto& a : agents) {
    const std::string t = tag(a.id);
    auto actor = load_model(dir / ("actor_" + t + ".bin"));
    auto critic = load_model(dir / ("critic_" + t + ".bin"));
    if (!actor.same_shape(a.actor) || !critic.same_shape(a.critic))
      throw FormatError("checkpoint networks do not match the configured shapes");
    a.actor = std::move(actor);
    a.critic = std::move(critic);
    a.target_actor = load_model(dir / ("target_actor_" + t + ".bin"));
    a.target_critic = load_model(dir / ("target_critic_" + t + ".bin"));
    a.actor_opt.first_moment = deserialize_parameters(read_file_bytes(dir / ("actor_adam_m_" + t + ".bin")), a.actor);
    a.actor_opt.second_moment = deserialize_parameters(read_file_bytes(dir / ("actor_adam_v_" + t + ".bin")), a.actor);
    a.critic_opt.first_moment = deserialize_parameters(read_file_bytes(dir / ("critic_adam_m_" + t + ".bin")), a.critic);
    a.critic_opt.second_moment = deserialize_parameters(read_file_bytes(dir / ("critic_adam_v_" + t + ".bin")), a.critic);
    const auto& s = state.at("agents").at(t);
    a.noise_scale = s.at("noise_scale").get<double>();
    a.actor_opt.step = s.at("actor_adam_step").get<std::int64_t>();
    a.critic_opt.step = s.at("critic_adam_step").get<std::int64_t>();
  }
  auto global = load_model(dir / "global_actor.bin");
  std::istringstream rng_text(state.at("rng").get<std::string>());
  Rng rng;
  rng_text >> rng;
  if (!rng_text) throw FormatError("checkpoint state: bad rng state");

  agents_ = std::move(agents);
  controller_.global_actor = std::move(global);
  controller_.round = state.at("round").get<int>();
  epoch_ = state.at("epoch").get<std::int64_t>();
  rng_ = rng;
}

void Trainer::save_models(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& a : agents_) {
    const std::string t = tag(a.id);
    save_model(dir / ("actor_" + t + ".bin"), a.actor);
    save_model(dir / ("critic_" + t + ".bin"), a.critic);
  }
  save_model(dir / "global_actor.bin", controller_.global_actor);
}

}  // namespace fd2k
