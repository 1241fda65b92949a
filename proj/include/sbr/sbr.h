/* Copyright 2026 The sbr Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the sbr library. Every function returns an sbr_status;
 * on failure sbr_last_error() describes the problem for the calling thread.
 * Objects returned through out-parameters are owned by the caller and are
 * released with the matching *_free function. Free functions accept NULL.
 */
#ifndef SBR_SBR_H_
#define SBR_SBR_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SBR_API __declspec(dllexport)
#else
#define SBR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sbr_status {
  SBR_OK = 0,
  SBR_ERR_PARAM = 1,    /* invalid argument or configuration */
  SBR_ERR_DATA = 2,     /* data violates an invariant */
  SBR_ERR_FORMAT = 3,   /* malformed or truncated file */
  SBR_ERR_NUMERIC = 4,  /* non-finite values or divergence */
  SBR_ERR_IO = 5,       /* file could not be opened, read or written */
  SBR_ERR_INTERNAL = 6
} sbr_status;

typedef struct sbr_config sbr_config;
typedef struct sbr_dataset sbr_dataset;
typedef struct sbr_model sbr_model;
typedef struct sbr_report sbr_report;

typedef struct sbr_dataset_info {
  size_t n_samples;
  int32_t n_tokens;
  int32_t input_dim;
  int32_t output_dim;
} sbr_dataset_info;

SBR_API const char* sbr_version(void);
SBR_API const char* sbr_last_error(void);
SBR_API const char* sbr_status_name(sbr_status status);

/* Flat key = value configuration. */
SBR_API sbr_status sbr_config_new(sbr_config** out);
SBR_API sbr_status sbr_config_load(const char* path, sbr_config** out);
SBR_API sbr_status sbr_config_set(sbr_config* config, const char* key, const char* value);
/* Sets *value to NULL when the key is absent. The string stays valid until
 * the config is modified or freed. */
SBR_API sbr_status sbr_config_get(const sbr_config* config, const char* key, const char** value);
/* Writes 16 hex digits and a terminating NUL into buf (at least 17 bytes). */
SBR_API sbr_status sbr_config_hash(const sbr_config* config, char* buf, size_t size);
SBR_API void sbr_config_free(sbr_config* config);

/* Datasets. */
SBR_API sbr_status sbr_dataset_generate(const sbr_config* config, sbr_dataset** out);
SBR_API sbr_status sbr_dataset_read(const char* path, sbr_dataset** out);
SBR_API sbr_status sbr_dataset_write(const sbr_dataset* dataset, const char* path);
SBR_API sbr_status sbr_dataset_info_get(const sbr_dataset* dataset, sbr_dataset_info* out);
SBR_API void sbr_dataset_free(sbr_dataset* dataset);

/* Models. */
SBR_API sbr_status sbr_model_init(const sbr_config* config, sbr_model** out);
SBR_API sbr_status sbr_model_load(const char* path, sbr_model** out);
SBR_API sbr_status sbr_model_save(const sbr_model* model, const char* path);
/* Row-major input of n_tokens x in_dim (normalized features); output must
 * hold n_tokens x out_dim values. Routing follows the config. */
SBR_API sbr_status sbr_model_predict(const sbr_model* model, const sbr_config* config,
                                     const double* input, int32_t n_tokens, int32_t in_dim,
                                     double* output, size_t output_size);
SBR_API void sbr_model_free(sbr_model* model);

/* Training and analysis. Reports are CSV text ending in a config-hash
 * comment line. */
SBR_API sbr_status sbr_train(const sbr_config* config, const sbr_dataset* dataset,
                             sbr_model** model, sbr_report** loss_curve);
SBR_API sbr_status sbr_evaluate(const sbr_model* model, const sbr_dataset* dataset,
                                const sbr_config* config, sbr_report** out);
SBR_API sbr_status sbr_flops(const sbr_config* config, sbr_report** out);
SBR_API sbr_status sbr_bench(const sbr_model* model, const sbr_dataset* dataset,
                             const sbr_config* config, sbr_report** out);
SBR_API sbr_status sbr_route_analyze(const sbr_model* model, const sbr_dataset* dataset,
                                     const sbr_config* config, sbr_report** out);
SBR_API sbr_status sbr_complexity(const sbr_dataset* dataset, const sbr_config* config,
                                  sbr_report** out);
/* name: compare-schedules, ablate-random, compare-mor or sweep-depth.
 * `extra` (may be NULL) receives the per-layer load table of compare-mor. */
SBR_API sbr_status sbr_experiment(const char* name, const sbr_dataset* dataset,
                                  const sbr_config* config, sbr_report** out,
                                  sbr_report** extra);

SBR_API const char* sbr_report_csv(const sbr_report* report);
SBR_API void sbr_report_free(sbr_report* report);

#ifdef __cplusplus
}
#endif

#endif /* SBR_SBR_H_ */
