#include "federated.hpp"

#include <string>

#include "errors.hpp"

namespace fd2k {

Distribution init_and_distribute(std::uint64_t seed, const std::vector<int>& dims, int interval) {
  if (interval < 1) throw ConfigError("federated interval E must be >= 1");
  Distribution d;
  d.controller.global_actor = Mlp::init(dims, Activation::sigmoid, seed);
  d.controller.interval = interval;
  d.actor_a = d.controller.global_actor;
  d.actor_b = d.controller.global_actor;
  return d;
}

bool should_aggregate(std::int64_t epoch, int interval) {
  if (epoch < 1) throw RangeError("should_aggregate: epochs are 1-based");
  if (interval < 1) throw ConfigError("should_aggregate: E must be >= 1");
  return epoch % interval == 0;
}

Mlp aggregate(const Mlp& a, const Mlp& b) {
  if (!a.same_shape(b)) throw DimensionError("aggregate: actor shapes differ");
  Mlp out = a;
  auto& p = out.mutable_params();
  const auto& q = b.params();
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    p.weights[l] = 0.5 * (p.weights[l] + q.weights[l]);
    p.biases[l] = 0.5 * (p.biases[l] + q.biases[l]);
  }
  return out;
}

void InProcessExchange::upload(Owner from, int round, std::span<const std::uint8_t> actor) {
  uploads_[{static_cast<char>(from), round}] = std::vector<std::uint8_t>(actor.begin(), actor.end());
}

std::vector<std::uint8_t> InProcessExchange::collect(Owner from, int round) {
  auto it = uploads_.find({static_cast<char>(from), round});
  if (it == uploads_.end()) throw Error("exchange: no upload from " + std::string(1, static_cast<char>(from)));
  auto bytes = std::move(it->second);
  uploads_.erase(it);
  return bytes;
}

void InProcessExchange::publish(int round, std::span<const std::uint8_t> global_actor) {
  published_[round] = std::vector<std::uint8_t>(global_actor.begin(), global_actor.end());
  // Only the latest round is ever downloaded.
  while (published_.size() > 1) published_.erase(published_.begin());
}

std::vector<std::uint8_t> InProcessExchange::download(Owner, int round) {
  auto it = published_.find(round);
  if (it == published_.end()) throw Error("exchange: round " + std::to_string(round) + " not published");
  return it->second;
}

SpoolDirectoryExchange::SpoolDirectoryExchange(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path SpoolDirectoryExchange::upload_path(Owner from, int round) const {
  return dir_ / ("actor_" + std::string(1, static_cast<char>(from)) + "_round" + std::to_string(round) + ".bin");
}

std::filesystem::path SpoolDirectoryExchange::global_path(int round) const {
  return dir_ / ("global_round" + std::to_string(round) + ".bin");
}

void SpoolDirectoryExchange::upload(Owner from, int round, std::span<const std::uint8_t> actor) {
  write_file_bytes(upload_path(from, round), actor);
}

std::vector<std::uint8_t> SpoolDirectoryExchange::collect(Owner from, int round) {
  return read_file_bytes(upload_path(from, round));
}

void SpoolDirectoryExchange::publish(int round, std::span<const std::uint8_t> global_actor) {
  write_file_bytes(global_path(round), global_actor);
}

std::vector<std::uint8_t> SpoolDirectoryExchange::download(Owner, int round) {
  return read_file_bytes(global_path(round));
}

void federated_round(ControllerState& controller, Agent& alice, Agent& bob, ModelExchange& exchange) {
  const int round = controller.round + 1;
  exchange.upload(Owner::alice, round, serialize(alice.actor));
  exchange.upload(Owner::bob, round, serialize(bob.actor));

  const Mlp from_a = deserialize(exchange.collect(Owner::alice, round));
  const Mlp from_b = deserialize(exchange.collect(Owner::bob, round));
  if (!from_a.same_shape(controller.global_actor) || !from_b.same_shape(controller.global_actor))
    throw DimensionError("federated_round: uploaded actor does not match the global actor shape");
  controller.global_actor = aggregate(from_a, from_b);
  controller.round = round;
  exchange.publish(round, serialize(controller.global_actor));

  alice.actor = deserialize(exchange.download(Owner::alice, round));
  bob.actor = deserialize(exchange.download(Owner::bob, round));
}

}  // namespace fd2k
