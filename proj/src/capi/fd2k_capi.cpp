#include "fd2k/fd2k.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "config.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "randomness.hpp"
#include "session.hpp"

struct fd2k_config {
  fd2k::RunConfig value;
};

struct fd2k_trainer {
  std::unique_ptr<fd2k::Trainer> value;
};

namespace {

thread_local std::string last_error;

fd2k_status fail(fd2k_status status, const std::string& message) {
  last_error = message;
  return status;
}

struct InvalidArgument : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Maps library exceptions onto status codes.
template <class F>
fd2k_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return FD2K_OK;
  } catch (const InvalidArgument& e) {
    return fail(FD2K_ERR_INVALID_ARGUMENT, e.what());
  } catch (const fd2k::ConfigError& e) {
    return fail(FD2K_ERR_CONFIG, e.what());
  } catch (const fd2k::DimensionError& e) {
    return fail(FD2K_ERR_DIMENSION, e.what());
  } catch (const fd2k::RangeError& e) {
    return fail(FD2K_ERR_RANGE, e.what());
  } catch (const fd2k::FormatError& e) {
    return fail(FD2K_ERR_FORMAT, e.what());
  } catch (const fd2k::IoError& e) {
    return fail(FD2K_ERR_IO, e.what());
  } catch (const fd2k::NumericError& e) {
    return fail(FD2K_ERR_NUMERIC, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(FD2K_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(FD2K_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FD2K_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(FD2K_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(what);
}

fd2k_status copy_out(const std::string& text, char* buffer, size_t capacity, size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (!buffer) return needed ? FD2K_OK : fail(FD2K_ERR_INVALID_ARGUMENT, "null output buffer");
  if (capacity < text.size() + 1) return fail(FD2K_ERR_INVALID_ARGUMENT, "output buffer too small");
  std::memcpy(buffer, text.c_str(), text.size() + 1);
  return FD2K_OK;
}

void fill_results(const std::vector<fd2k::TestReport>& reports, fd2k_nist_result* out) {
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    auto& o = out[i];
    std::memset(&o, 0, sizeof o);
    std::strncpy(o.name, r.test_name.c_str(), sizeof o.name - 1);
    o.has_p_value = r.p_values.empty() ? 0 : 1;
    o.p_value = r.p_values.empty() ? std::nan("") : r.reported_p;
    o.pass = r.pass ? 1 : 0;
    o.applicable = r.applicable ? 1 : 0;
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fd2k::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw fd2k::IoError("failed writing " + path.string());
}

struct Moments {
  double mean = 0, stddev = 0, min = 0, max = 0;
};

Moments moments(const std::vector<double>& x) {
  Moments m;
  if (x.empty()) return m;
  m.min = m.max = x.front();
  for (double v : x) {
    m.mean += v;
    m.min = std::min(m.min, v);
    m.max = std::max(m.max, v);
  }
  m.mean /= static_cast<double>(x.size());
  for (double v : x) m.stddev += (v - m.mean) * (v - m.mean);
  m.stddev = std::sqrt(m.stddev / static_cast<double>(x.size()));
  return m;
}

std::vector<double> differences(const std::vector<double>& x) {
  std::vector<double> d;
  for (std::size_t i = 1; i < x.size(); ++i) d.push_back(x[i] - x[i - 1]);
  return d;
}

}  // namespace

extern "C" {

const char* fd2k_last_error(void) { return last_error.c_str(); }

const char* fd2k_status_name(fd2k_status status) {
  switch (status) {
    case FD2K_OK: return "ok";
    case FD2K_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FD2K_ERR_CONFIG: return "config error";
    case FD2K_ERR_DIMENSION: return "dimension error";
    case FD2K_ERR_RANGE: return "range error";
    case FD2K_ERR_FORMAT: return "format error";
    case FD2K_ERR_IO: return "io error";
    case FD2K_ERR_NUMERIC: return "numeric error";
    case FD2K_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* fd2k_version(void) { return "1.0.0"; }

fd2k_status fd2k_config_create(fd2k_config** out) {
  return guarded([&] {
    require(out, "fd2k_config_create: null output");
    *out = new fd2k_config{};
  });
}

void fd2k_config_destroy(fd2k_config* config) { delete config; }

fd2k_status fd2k_config_clone(const fd2k_config* config, fd2k_config** out) {
  return guarded([&] {
    require(config && out, "fd2k_config_clone: null argument");
    *out = new fd2k_config{config->value};
  });
}

fd2k_status fd2k_config_merge_file(fd2k_config* config, const char* path) {
  return guarded([&] {
    require(config && path, "fd2k_config_merge_file: null argument");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw fd2k::IoError(std::string("cannot open config file ") + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto merged = config->value;
    merged.merge_toml(text, path);
    config->value = std::move(merged);
  });
}

fd2k_status fd2k_config_set(fd2k_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config && key && value, "fd2k_config_set: null argument");
    config->value.set(key, value);
  });
}

fd2k_status fd2k_config_get(const fd2k_config* config, const char* key, char* buffer, size_t capacity,
                            size_t* needed) {
  std::string text;
  auto status = guarded([&] {
    require(config && key, "fd2k_config_get: null argument");
    text = config->value.get(key);
  });
  return status == FD2K_OK ? copy_out(text, buffer, capacity, needed) : status;
}

fd2k_status fd2k_config_validate(const fd2k_config* config) {
  return guarded([&] {
    require(config, "fd2k_config_validate: null config");
    config->value.validate();
  });
}

fd2k_status fd2k_config_to_toml(const fd2k_config* config, char* buffer, size_t capacity, size_t* needed) {
  std::string text;
  auto status = guarded([&] {
    require(config, "fd2k_config_to_toml: null config");
    text = config->value.to_toml();
  });
  return status == FD2K_OK ? copy_out(text, buffer, capacity, needed) : status;
}

fd2k_status fd2k_config_write(const fd2k_config* config, const char* path) {
  return guarded([&] {
    require(config && path, "fd2k_config_write: null argument");
    write_text(path, config->value.to_toml());
  });
}

fd2k_status fd2k_simulate(const fd2k_config* config, const char* trace_path, fd2k_simulation_summary* summary) {
  return guarded([&] {
    require(config && trace_path, "fd2k_simulate: null argument");
    const auto& c = config->value;
    c.validate();
    const auto traces =
        fd2k::synth_traces(c.scenario, c.synth, fd2k::derive_seed(c.seed, fd2k::SeedStream::synth));
    fd2k::write_traces(trace_path, traces);
    if (!summary) return;
    std::memset(summary, 0, sizeof *summary);
    const std::string nodes[3] = {c.scenario.alice_node, c.scenario.bob_node, c.scenario.eve_node};
    for (int i = 0; i < 3; ++i) {
      const auto& x = fd2k::trace_for(traces, nodes[i]).samples;
      const auto m = moments(x);
      summary->samples_per_node = x.size();
      summary->mean[i] = m.mean;
      summary->stddev[i] = m.stddev;
      summary->min[i] = m.min;
      summary->max[i] = m.max;
    }
    const auto da = differences(fd2k::trace_for(traces, nodes[0]).samples);
    summary->corr_alice_bob = fd2k::pearson_correlation(da, differences(fd2k::trace_for(traces, nodes[1]).samples));
    summary->corr_alice_eve = fd2k::pearson_correlation(da, differences(fd2k::trace_for(traces, nodes[2]).samples));
  });
}

fd2k_status fd2k_trainer_create(const fd2k_config* config, fd2k_trainer** out) {
  return guarded([&] {
    require(config && out, "fd2k_trainer_create: null argument");
    config->value.validate();
    auto traces = fd2k::training_traces(config->value);
    *out = new fd2k_trainer{std::make_unique<fd2k::Trainer>(config->value, traces)};
  });
}

void fd2k_trainer_destroy(fd2k_trainer* trainer) { delete trainer; }

fd2k_status fd2k_trainer_run_epoch(fd2k_trainer* trainer, fd2k_epoch_metrics* metrics) {
  return guarded([&] {
    require(trainer, "fd2k_trainer_run_epoch: null trainer");
    const auto m = trainer->value->run_epoch();
    if (!metrics) return;
    metrics->epoch = m.epoch;
    metrics->accumulated_reward = m.accumulated_reward;
    metrics->mean_reward = m.mean_reward;
    metrics->mean_kar = m.mean_kar;
    metrics->mask_utilization = m.mask_utilization;
    metrics->noise_scale = m.noise_scale;
    metrics->critic_loss = m.critic_loss;
    metrics->updates = m.updates;
    metrics->aggregated = m.aggregated ? 1 : 0;
  });
}

int64_t fd2k_trainer_epoch(const fd2k_trainer* trainer) { return trainer ? trainer->value->epoch() : -1; }

fd2k_status fd2k_trainer_save_checkpoint(const fd2k_trainer* trainer, const char* dir) {
  return guarded([&] {
    require(trainer && dir, "fd2k_trainer_save_checkpoint: null argument");
    trainer->value->save_checkpoint(dir);
  });
}

fd2k_status fd2k_trainer_load_checkpoint(fd2k_trainer* trainer, const char* dir) {
  return guarded([&] {
    require(trainer && dir, "fd2k_trainer_load_checkpoint: null argument");
    trainer->value->load_checkpoint(dir);
  });
}

fd2k_status fd2k_trainer_save_models(const fd2k_trainer* trainer, const char* dir) {
  return guarded([&] {
    require(trainer && dir, "fd2k_trainer_save_models: null argument");
    trainer->value->save_models(dir);
  });
}

fd2k_status fd2k_evaluate(const fd2k_config* config, const char* models_dir, const char* out_dir,
                          fd2k_eval_summary* summary) {
  return guarded([&] {
    require(config && models_dir && out_dir, "fd2k_evaluate: null argument");
    const auto& c = config->value;
    c.validate();
    const std::filesystem::path models(models_dir);
    const auto actor_a = fd2k::load_model(models / "actor_A.bin");
    const auto actor_b = fd2k::load_model(models / "actor_B.bin");
    const auto eve_actor = actor_b;

    fd2k::WindowSource windows;
    fd2k::TraceSet recording;
    if (!c.trace_file.empty()) {
      recording = fd2k::load_traces(c.trace_file, c.scenario, fd2k::kAllSamples);
      windows = fd2k::trace_windows(recording, c.scenario);
    } else {
      windows = fd2k::synthetic_windows(c, fd2k::derive_seed(c.seed, fd2k::SeedStream::eval_synth));
    }
    const auto run = fd2k::evaluate_run(actor_a, actor_b, eve_actor, windows, c);

    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);
    write_text(out / "eval_report.json", fd2k::report_json(run, c));
    write_text(out / "eval_report.csv", fd2k::report_csv(run.summary));
    const std::pair<fd2k::Owner, const char*> owners[] = {
        {fd2k::Owner::alice, "A"}, {fd2k::Owner::bob, "B"}, {fd2k::Owner::eve, "E"}};
    std::size_t bits = 0;
    for (const auto& [owner, tag] : owners) {
      fd2k::write_key_lines(out / (std::string("keys_") + tag + ".txt"), run.episodes, owner);
      const auto stream = fd2k::export_keystream(run.episodes, owner);
      fd2k::write_bitstream(out / (std::string("keystream_") + tag + ".txt"), stream);
      bits = stream.size();
    }
    if (!summary) return;
    const auto& s = run.summary;
    summary->episodes = run.episodes.size();
    summary->keystream_bits = bits;
    summary->mean_kar_ab = s.mean_kar_ab;
    summary->mean_kar_ae = s.mean_kar_ae;
    summary->mean_gap = fd2k::kar_gap(s).mean_gap;
    summary->min_gap = s.min_gap;
    summary->mask_utilization = s.mask_utilization;
    summary->eve_mask_utilization = s.eve_mask_utilization;
    summary->uniqueness_hamming = s.uniqueness;
  });
}

fd2k_status fd2k_nist_run_bits(const uint8_t* bits, size_t count, fd2k_nist_result* results) {
  return guarded([&] {
    require(results && (bits || count == 0), "fd2k_nist_run_bits: null argument");
    for (size_t i = 0; i < count; ++i)
      if (bits[i] > 1) throw fd2k::FormatError("fd2k_nist_run_bits: bit values must be 0 or 1");
    fill_results(fd2k::run_suite(fd2k::Bits(bits, count)), results);
  });
}

fd2k_status fd2k_nist_run_file(const char* path, fd2k_nist_result* results, size_t* bit_count) {
  return guarded([&] {
    require(path && results, "fd2k_nist_run_file: null argument");
    const auto bits = fd2k::read_bitstream(path);
    fill_results(fd2k::run_suite(bits), results);
    if (bit_count) *bit_count = bits.size();
  });
}

fd2k_status fd2k_nist_write_csv(const fd2k_nist_result* results, size_t count, const char* path) {
  return guarded([&] {
    require(path && (results || count == 0), "fd2k_nist_write_csv: null argument");
    std::vector<fd2k::TestReport> reports;
    for (size_t i = 0; i < count; ++i) {
      fd2k::TestReport r;
      r.test_name = std::string(results[i].name, strnlen(results[i].name, sizeof results[i].name));
      if (results[i].has_p_value) r.p_values.push_back(results[i].p_value);
      r.reported_p = results[i].p_value;
      r.pass = results[i].pass != 0;
      r.applicable = results[i].applicable != 0;
      reports.push_back(std::move(r));
    }
    write_text(path, fd2k::reports_csv(reports));
  });
}

}  // extern "C"
