// Copyright 2026 The synthneg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


/* C interface to the synthneg library.
 *
 * Every function returns an sn_status. On failure the message of the most
 * recent error on the calling thread is available from sn_last_error().
 * Objects are opaque handles released with their matching _free function;
 * strings returned through handles stay valid until the handle is freed. */

#ifndef SYNTHNEG_SYNTHNEG_H_
#define SYNTHNEG_SYNTHNEG_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SN_API __declspec(dllexport)
#else
#define SN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sn_status {
  SN_OK = 0,
  SN_ERR_INVALID_ARGUMENT = 1,
  SN_ERR_IO = 2,
  SN_ERR_FORMAT = 3,
  SN_ERR_NUMERIC = 4,
  SN_ERR_INTERNAL = 5
} sn_status;

typedef struct sn_config sn_config;
typedef struct sn_report sn_report;

typedef void (*sn_progress_fn)(const char* line, void* user);

SN_API const char* sn_version(void);
SN_API const char* sn_status_name(sn_status status);
SN_API const char* sn_last_error(void);
/* 0 = errors only, 1 = warnings and info, 2 = debug. */
SN_API void sn_set_verbosity(int level);

/* Configuration. */
SN_API sn_status sn_config_create(sn_config** out);
SN_API sn_status sn_config_load(const char* path, sn_config** out);
SN_API sn_status sn_config_parse(const char* text, sn_config** out);
SN_API sn_status sn_config_set(sn_config* config, const char* key, const char* value);
SN_API sn_status sn_config_validate(const sn_config* config);
/* Canonical text; the returned string belongs to the config. */
SN_API sn_status sn_config_text(sn_config* config, const char** out);
/* Writes 16 hex digits and a terminating NUL into out[17]. */
SN_API sn_status sn_config_fingerprint(const sn_config* config, char out[17]);
SN_API void sn_config_free(sn_config* config);

/* Training and evaluation. Directory arguments may be NULL. */
SN_API sn_status sn_train(const sn_config* config, const char* out_dir, const char* cache_dir,
                          sn_progress_fn progress, void* user, sn_report** out);
/* Evaluates a classifier checkpoint on the config's test set, or on the
 * test_*.snsc scenes of data_dir when given. bench != 0 adds throughput. */
SN_API sn_status sn_evaluate(const sn_config* config, const char* seg_checkpoint,
                             const char* data_dir, int bench, sn_report** out);
/* Throughput of OH and every configured score kind. A NULL checkpoint
 * benchmarks a freshly initialised classifier. */
SN_API sn_status sn_bench(const sn_config* config, const char* seg_checkpoint, int repeats,
                          sn_report** out);
/* Seven-variant grid over seeds seed, seed+1, ..., seed+seeds-1 when
 * all_variants != 0, otherwise the configured variant only. Resumable. */
SN_API sn_status sn_grid_run(const sn_config* config, int all_variants, int seeds,
                             const char* out_dir, const char* cache_dir, sn_report** out);
SN_API sn_status sn_gen_data(const sn_config* config, const char* out_dir, size_t* scene_count);
/* Draws count pixels from a flow checkpoint; the report text holds one
 * sample per line. */
SN_API sn_status sn_sample_flow(const char* flow_checkpoint, uint64_t seed, size_t count,
                                sn_report** out);

/* Reports. */
SN_API const char* sn_report_text(const sn_report* report);
SN_API const char* sn_report_csv(const sn_report* report);
SN_API size_t sn_report_row_count(const sn_report* report);
SN_API const char* sn_report_row_method(const sn_report* report, size_t row);
SN_API const char* sn_report_row_score(const sn_report* report, size_t row);
/* name: ap, fpr95, auroc, closed_miou, open_miou, scenes_per_sec, cv,
 * inlier_log_density, negative_log_density. */
SN_API sn_status sn_report_metric(const sn_report* report, size_t row, const char* name,
                                  double* out);
SN_API uint64_t sn_report_train_steps(const sn_report* report);
SN_API void sn_report_free(sn_report* report);

#ifdef __cplusplus
}
#endif

#endif /* SYNTHNEG_SYNTHNEG_H_ */
