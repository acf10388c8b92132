#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fd2k/fd2k.h"

namespace fs = std::filesystem;

namespace {

enum Exit { kSuccess = 0, kUsage = 1, kRuntime = 2, kCheckFailed = 3 };

struct Failure {
  int code;
  std::string message;
};

int exit_for(fd2k_status s) {
  return s == FD2K_ERR_CONFIG || s == FD2K_ERR_INVALID_ARGUMENT ? kUsage : kRuntime;
}

void check(fd2k_status s, const std::string& context) {
  if (s != FD2K_OK) throw Failure{exit_for(s), context + ": " + fd2k_last_error()};
}

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

using ConfigPtr = std::unique_ptr<fd2k_config, decltype(&fd2k_config_destroy)>;
using TrainerPtr = std::unique_ptr<fd2k_trainer, decltype(&fd2k_trainer_destroy)>;

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string seed;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_file, "TOML configuration file");
  cmd->add_option("--set", o.overrides, "Override a config key (key=value), repeatable");
  cmd->add_option("--seed", o.seed, "Master seed (overrides FD2K_SEED and the config file)");
}

// File, then FD2K_SEED, then --set, then --seed.
ConfigPtr build_config(const CommonOptions& o) {
  fd2k_config* raw = nullptr;
  check(fd2k_config_create(&raw), "config");
  ConfigPtr config(raw, &fd2k_config_destroy);
  if (!o.config_file.empty()) check(fd2k_config_merge_file(config.get(), o.config_file.c_str()), "config file");
  if (const char* env = std::getenv("FD2K_SEED"); env && *env)
    check(fd2k_config_set(config.get(), "seed", env), "FD2K_SEED");
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw Failure{kUsage, "--set expects key=value, got '" + kv + "'"};
    check(fd2k_config_set(config.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "--set " + kv);
  }
  if (!o.seed.empty()) check(fd2k_config_set(config.get(), "seed", o.seed.c_str()), "--seed");
  check(fd2k_config_validate(config.get()), "config");
  return config;
}

std::string get(const fd2k_config* config, const char* key) {
  size_t needed = 0;
  check(fd2k_config_get(config, key, nullptr, 0, &needed), key);
  std::string value(needed, '\0');
  check(fd2k_config_get(config, key, value.data(), value.size(), &needed), key);
  value.resize(needed - 1);
  return value;
}

long long get_int(const fd2k_config* config, const char* key) { return std::stoll(get(config, key)); }

void prepare_output(const fd2k_config* config, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{kUsage, "output directory " + dir.string() + ": " + ec.message()};
  check(fd2k_config_write(config, (dir / "config.toml").string().c_str()), "writing effective config");
}

int cmd_simulate(const CommonOptions& o, std::string out) {
  auto config = build_config(o);
  const fs::path dir = get(config.get(), "output_dir");
  if (out.empty()) out = (dir / "traces.csv").string();
  prepare_output(config.get(), dir);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  fd2k_simulation_summary s{};
  check(fd2k_simulate(config.get(), out.c_str(), &s), "simulate");
  const std::string nodes[3] = {get(config.get(), "scenario.alice_node"), get(config.get(), "scenario.bob_node"),
                                get(config.get(), "scenario.eve_node")};
  const char* roles[3] = {"alice", "bob", "eve"};
  std::cout << "wrote " << out << " (" << s.samples_per_node << " samples per node)\n";
  std::cout << "role,node_id,mean,stddev,min,max\n";
  for (int i = 0; i < 3; ++i)
    std::cout << roles[i] << ',' << nodes[i] << ',' << num(s.mean[i]) << ',' << num(s.stddev[i]) << ','
              << num(s.min[i]) << ',' << num(s.max[i]) << '\n';
  std::cout << "diff_corr_alice_bob," << num(s.corr_alice_bob) << "\ndiff_corr_alice_eve," << num(s.corr_alice_eve)
            << '\n';
  return kSuccess;
}

int cmd_train(const CommonOptions& o, const std::string& resume, int progress) {
  auto config = build_config(o);
  const fs::path dir = get(config.get(), "output_dir");
  prepare_output(config.get(), dir);
  const auto e_max = get_int(config.get(), "e_max");
  const auto every = get_int(config.get(), "checkpoint_every") > 0 ? get_int(config.get(), "checkpoint_every")
                                                                   : get_int(config.get(), "E");

  fd2k_trainer* raw = nullptr;
  check(fd2k_trainer_create(config.get(), &raw), "trainer");
  TrainerPtr trainer(raw, &fd2k_trainer_destroy);
  if (!resume.empty()) check(fd2k_trainer_load_checkpoint(trainer.get(), resume.c_str()), "resume");

  const auto metrics_path = dir / "metrics.csv";
  const bool append = !resume.empty() && fs::exists(metrics_path);
  std::ofstream metrics(metrics_path, append ? std::ios::app : std::ios::trunc);
  if (!metrics) throw Failure{kRuntime, "cannot write " + metrics_path.string()};
  if (!append)
    metrics << "epoch,accumulated_reward,mean_kar,mask_utilization,noise_scale,mean_reward,critic_loss,aggregated\n";

  const auto checkpoint = (dir / "checkpoint").string();
  while (fd2k_trainer_epoch(trainer.get()) < e_max) {
    fd2k_epoch_metrics m{};
    check(fd2k_trainer_run_epoch(trainer.get(), &m), "epoch " + std::to_string(fd2k_trainer_epoch(trainer.get()) + 1));
    metrics << m.epoch << ',' << num(m.accumulated_reward) << ',' << num(m.mean_kar) << ','
            << num(m.mask_utilization) << ',' << num(m.noise_scale) << ',' << num(m.mean_reward) << ','
            << num(m.critic_loss) << ',' << m.aggregated << '\n';
    metrics.flush();
    if (m.epoch % every == 0) check(fd2k_trainer_save_checkpoint(trainer.get(), checkpoint.c_str()), "checkpoint");
    if (progress > 0 && m.epoch % progress == 0)
      std::cerr << "epoch " << m.epoch << "/" << e_max << " reward " << num(m.accumulated_reward) << " kar "
                << num(m.mean_kar) << "\n";
  }
  if (!metrics) throw Failure{kRuntime, "failed writing " + metrics_path.string()};
  check(fd2k_trainer_save_checkpoint(trainer.get(), checkpoint.c_str()), "checkpoint");
  const auto models = (dir / "models").string();
  check(fd2k_trainer_save_models(trainer.get(), models.c_str()), "models");
  std::cout << "trained to epoch " << fd2k_trainer_epoch(trainer.get()) << "; models in " << models << "\n";
  return kSuccess;
}

int cmd_evaluate(const CommonOptions& o, std::string models, std::string out) {
  auto config = build_config(o);
  const fs::path dir = get(config.get(), "output_dir");
  if (models.empty()) models = (dir / "models").string();
  if (out.empty()) out = (dir / "eval").string();
  prepare_output(config.get(), out);
  fd2k_eval_summary s{};
  check(fd2k_evaluate(config.get(), models.c_str(), out.c_str(), &s), "evaluate");
  std::cout << "episodes," << s.episodes << "\nkeystream_bits," << s.keystream_bits << "\nmean_kar_ab,"
            << num(s.mean_kar_ab) << "\nmean_kar_ae," << num(s.mean_kar_ae) << "\nmean_gap," << num(s.mean_gap)
            << "\nmin_gap," << num(s.min_gap) << "\nmask_utilization," << num(s.mask_utilization)
            << "\nuniqueness_hamming," << num(s.uniqueness_hamming) << "\nreports," << out << "\n";
  return kSuccess;
}

int cmd_nist(const std::string& path, const std::string& out) {
  fd2k_nist_result results[FD2K_NIST_TEST_COUNT];
  size_t bits = 0;
  check(fd2k_nist_run_file(path.c_str(), results, &bits), "nist");
  std::string csv_path = out;
  if (csv_path.empty()) {
    std::cout << "test,p_value,pass,applicable\n";
    for (const auto& r : results)
      std::cout << r.name << ',' << (r.has_p_value ? num(r.p_value) : "NA") << ',' << (r.pass ? "true" : "false")
                << ',' << (r.applicable ? "true" : "false") << '\n';
  } else {
    check(fd2k_nist_write_csv(results, FD2K_NIST_TEST_COUNT, csv_path.c_str()), "nist report");
  }
  bool all = true;
  for (const auto& r : results) all = all && r.pass;
  std::cerr << bits << " bits; " << (all ? "all tests pass" : "not all tests pass") << "\n";
  return all ? kSuccess : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated multi-agent key generation from correlated physical signals"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fd2k_version());

  CommonOptions sim_opts, train_opts, eval_opts;
  std::string sim_out, resume, models, eval_out, bitstream, nist_out;
  int progress = 100;

  auto* simulate = app.add_subcommand("simulate", "Write synthetic Alice/Bob/Eve traces");
  add_common(simulate, sim_opts);
  simulate->add_option("-o,--out", sim_out, "Trace CSV path (default <output_dir>/traces.csv)");

  auto* train = app.add_subcommand("train", "Train both agents with federated actor averaging");
  add_common(train, train_opts);
  train->add_option("--resume", resume, "Checkpoint directory to continue from");
  train->add_option("--progress", progress, "Print progress every N epochs (0 disables)");

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate trained actors against the Eve model");
  add_common(evaluate, eval_opts);
  evaluate->add_option("-m,--models", models, "Directory with actor_A.bin and actor_B.bin");
  evaluate->add_option("-o,--out", eval_out, "Report directory (default <output_dir>/eval)");

  auto* nist = app.add_subcommand("nist", "Run the randomness tests on an ASCII bitstream");
  nist->add_option("bitstream", bitstream, "File of '0'/'1' characters")->required();
  nist->add_option("-o,--out", nist_out, "Report CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim_opts, sim_out);
    if (*train) return cmd_train(train_opts, resume, progress);
    if (*evaluate) return cmd_evaluate(eval_opts, models, eval_out);
    if (*nist) return cmd_nist(bitstream, nist_out);
  } catch (const Failure& f) {
    std::cerr << "fd2k: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "fd2k: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
