#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "agent.hpp"
#include "nn.hpp"

namespace fd2k {

struct ControllerState {
  Mlp global_actor;
  int round = 0;
  int interval = 5;  // E
};

struct Distribution {
  ControllerState controller;
  Mlp actor_a;
  Mlp actor_b;
};

// Controller creates the global actor; Alice and Bob each receive an independent copy.
Distribution init_and_distribute(std::uint64_t seed, const std::vector<int>& dims, int interval);

bool should_aggregate(std::int64_t epoch, int interval);

// Elementwise mean of two congruent networks.
Mlp aggregate(const Mlp& a, const Mlp& b);

// Transport across the agent/controller boundary. Payloads are serialized actor models
// and nothing else; critics and replay memories never reach this interface.
class ModelExchange {
 public:
  virtual ~ModelExchange() = default;

  virtual void upload(Owner from, int round, std::span<const std::uint8_t> actor) = 0;
  virtual std::vector<std::uint8_t> collect(Owner from, int round) = 0;
  virtual void publish(int round, std::span<const std::uint8_t> global_actor) = 0;
  virtual std::vector<std::uint8_t> download(Owner to, int round) = 0;
};

class InProcessExchange : public ModelExchange {
 public:
  void upload(Owner from, int round, std::span<const std::uint8_t> actor) override;
  std::vector<std::uint8_t> collect(Owner from, int round) override;
  void publish(int round, std::span<const std::uint8_t> global_actor) override;
  std::vector<std::uint8_t> download(Owner to, int round) override;

 private:
  std::map<std::pair<char, int>, std::vector<std::uint8_t>> uploads_;
  std::map<int, std::vector<std::uint8_t>> published_;
};

// Exchanges models through files: actor_{A|B}_round{k}.bin up, global_round{k}.bin down.
class SpoolDirectoryExchange : public ModelExchange {
 public:
  explicit SpoolDirectoryExchange(std::filesystem::path dir);

  void upload(Owner from, int round, std::span<const std::uint8_t> actor) override;
  std::vector<std::uint8_t> collect(Owner from, int round) override;
  void publish(int round, std::span<const std::uint8_t> global_actor) override;
  std::vector<std::uint8_t> download(Owner to, int round) override;

  std::filesystem::path upload_path(Owner from, int round) const;
  std::filesystem::path global_path(int round) const;

 private:
  std::filesystem::path dir_;
};

// Upload both online actors, average at the controller, replace both online actors with
// the result. Target actors are left alone.
void federated_round(ControllerState& controller, Agent& alice, Agent& bob, ModelExchange& exchange);

}  // namespace fd2k
