#ifndef FD2K_FD2K_H
#define FD2K_FD2K_H

#include <stddef.h>
#include <stdint.h>

#if defined(FD2K_BUILDING_LIBRARY)
#define FD2K_API __attribute__((visibility("default")))
#else
#define FD2K_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fd2k_status {
  FD2K_OK = 0,
  FD2K_ERR_INVALID_ARGUMENT = 1, /* null handle or pointer, bad buffer */
  FD2K_ERR_CONFIG = 2,           /* invalid configuration or config file */
  FD2K_ERR_DIMENSION = 3,        /* shape mismatch */
  FD2K_ERR_RANGE = 4,            /* index or value out of range */
  FD2K_ERR_FORMAT = 5,           /* malformed file or bitstream */
  FD2K_ERR_IO = 6,               /* file missing, unreadable or unwritable */
  FD2K_ERR_NUMERIC = 7,          /* non-finite values */
  FD2K_ERR_INTERNAL = 8
} fd2k_status;

/* Message for the last failing call on this thread; "" when none. */
FD2K_API const char* fd2k_last_error(void);
FD2K_API const char* fd2k_status_name(fd2k_status status);
FD2K_API const char* fd2k_version(void);

/* Configuration ---------------------------------------------------------- */

typedef struct fd2k_config fd2k_config;

FD2K_API fd2k_status fd2k_config_create(fd2k_config** out);
FD2K_API void fd2k_config_destroy(fd2k_config* config);
FD2K_API fd2k_status fd2k_config_clone(const fd2k_config* config, fd2k_config** out);
/* Applies a TOML file on top of the current values. */
FD2K_API fd2k_status fd2k_config_merge_file(fd2k_config* config, const char* path);
/* Dotted key ("M", "synth.sigma_local"); value is a TOML literal or bare text. */
FD2K_API fd2k_status fd2k_config_set(fd2k_config* config, const char* key, const char* value);
/* String outputs: writes up to capacity bytes including the terminator; *needed (if
   non-null) receives the full length plus one. A null buffer with non-null needed is a
   size query. A short buffer yields FD2K_ERR_INVALID_ARGUMENT. */
FD2K_API fd2k_status fd2k_config_get(const fd2k_config* config, const char* key, char* buffer, size_t capacity,
                                     size_t* needed);
FD2K_API fd2k_status fd2k_config_validate(const fd2k_config* config);
FD2K_API fd2k_status fd2k_config_to_toml(const fd2k_config* config, char* buffer, size_t capacity, size_t* needed);
FD2K_API fd2k_status fd2k_config_write(const fd2k_config* config, const char* path);

/* Simulation ------------------------------------------------------------- */

/* Node order: Alice, Bob, Eve. */
typedef struct fd2k_simulation_summary {
  size_t samples_per_node;
  double mean[3];
  double stddev[3];
  double min[3];
  double max[3];
  double corr_alice_bob; /* Pearson correlation of first differences */
  double corr_alice_eve;
} fd2k_simulation_summary;

/* Writes one episode of synthetic Alice/Bob/Eve traces as CSV. summary may be null. */
FD2K_API fd2k_status fd2k_simulate(const fd2k_config* config, const char* trace_path,
                                   fd2k_simulation_summary* summary);

/* Training --------------------------------------------------------------- */

typedef struct fd2k_trainer fd2k_trainer;

typedef struct fd2k_epoch_metrics {
  int64_t epoch;
  double accumulated_reward;
  double mean_reward;
  double mean_kar;
  double mask_utilization;
  double noise_scale;
  double critic_loss;
  int32_t updates;
  int32_t aggregated; /* 1 if a federated round ran after this epoch */
} fd2k_epoch_metrics;

/* Uses the config's trace file, or synthesizes the training trace from the seed. */
FD2K_API fd2k_status fd2k_trainer_create(const fd2k_config* config, fd2k_trainer** out);
FD2K_API void fd2k_trainer_destroy(fd2k_trainer* trainer);
FD2K_API fd2k_status fd2k_trainer_run_epoch(fd2k_trainer* trainer, fd2k_epoch_metrics* metrics);
FD2K_API int64_t fd2k_trainer_epoch(const fd2k_trainer* trainer);
FD2K_API fd2k_status fd2k_trainer_save_checkpoint(const fd2k_trainer* trainer, const char* dir);
FD2K_API fd2k_status fd2k_trainer_load_checkpoint(fd2k_trainer* trainer, const char* dir);
/* actor_A.bin, actor_B.bin, critic_A.bin, critic_B.bin, global_actor.bin */
FD2K_API fd2k_status fd2k_trainer_save_models(const fd2k_trainer* trainer, const char* dir);

/* Evaluation ------------------------------------------------------------- */

typedef struct fd2k_eval_summary {
  size_t episodes;
  size_t keystream_bits; /* per owner */
  double mean_kar_ab;
  double mean_kar_ae;
  double mean_gap;
  double min_gap;
  double mask_utilization;
  double eve_mask_utilization;
  double uniqueness_hamming;
} fd2k_eval_summary;

/* Loads actor_A.bin and actor_B.bin from models_dir; Eve uses Bob's actor. Writes
   eval_report.json, eval_report.csv, keys_{A,B,E}.txt and keystream_{A,B,E}.txt into
   out_dir. summary may be null. */
FD2K_API fd2k_status fd2k_evaluate(const fd2k_config* config, const char* models_dir, const char* out_dir,
                                   fd2k_eval_summary* summary);

/* Randomness tests ------------------------------------------------------- */

#define FD2K_NIST_TEST_COUNT 8

typedef struct fd2k_nist_result {
  char name[48];
  double p_value;     /* minimum over the test's p-values */
  int32_t has_p_value;
  int32_t pass;       /* applicable and p_value >= 0.01 */
  int32_t applicable;
} fd2k_nist_result;

/* bits holds 0/1 values. Fills FD2K_NIST_TEST_COUNT results in report order. */
FD2K_API fd2k_status fd2k_nist_run_bits(const uint8_t* bits, size_t count, fd2k_nist_result* results);
/* ASCII '0'/'1' file; whitespace ignored. bit_count may be null. */
FD2K_API fd2k_status fd2k_nist_run_file(const char* path, fd2k_nist_result* results, size_t* bit_count);
/* CSV `test,p_value,pass,applicable`. */
FD2K_API fd2k_status fd2k_nist_write_csv(const fd2k_nist_result* results, size_t count, const char* path);

#ifdef __cplusplus
}
#endif

#endif
