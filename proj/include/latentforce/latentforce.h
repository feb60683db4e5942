/* Copyright 2026 The latentforce Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface of liblatentforce.
 *
 * Every fallible call returns an lf_status. On failure the message is
 * available from lf_last_error() until the next call on the same thread.
 * Objects are opaque handles released with their matching _free function;
 * strings returned through char** are released with lf_string_free.
 */

#ifndef LATENTFORCE_H_
#define LATENTFORCE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(LF_BUILDING_LIBRARY)
#define LF_API __attribute__((visibility("default")))
#else
#define LF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lf_status {
  LF_OK = 0,
  LF_ERR_INTERNAL = 1,
  LF_ERR_IO = 2,
  LF_ERR_CONFIG = 3,
  LF_ERR_NUMERIC = 4,
  LF_ERR_ARTIFACT = 5,
  LF_ERR_ARGUMENT = 6,
  LF_ERR_SHAPE = 7,
  LF_ERR_UNDEFINED = 8,
  LF_ERR_FROZEN = 9,
  LF_ERR_CONTRACT = 10
} lf_status;

typedef struct lf_config lf_config;
typedef struct lf_model lf_model;

/* Receives one log line at a time, without the trailing newline. */
typedef void (*lf_log_fn)(const char* line, void* user);

LF_API const char* lf_version(void);
LF_API const char* lf_last_error(void);
LF_API const char* lf_status_name(lf_status status);
/* Process exit code for a status: 0 ok, 2 I/O, 3 config or usage, 4 numeric,
 * 5 artifact mismatch, 1 anything else. */
LF_API int lf_exit_code(lf_status status);

/* Routes command logs; NULL restores the default (stdout). */
LF_API void lf_set_log(lf_log_fn fn, void* user);
LF_API void lf_string_free(char* s);

LF_API lf_status lf_config_defaults(lf_config** out);
LF_API lf_status lf_config_load(const char* path, lf_config** out);
LF_API lf_status lf_config_set(lf_config* cfg, const char* key, const char* value);
LF_API lf_status lf_config_dump(const lf_config* cfg, char** out);
LF_API void lf_config_free(lf_config* cfg);

LF_API lf_status lf_model_new(const lf_config* cfg, lf_model** out);
LF_API lf_status lf_model_load(const char* path, lf_model** out);
LF_API lf_status lf_model_save(const lf_model* model, const char* path);
LF_API void lf_model_free(lf_model* model);
LF_API lf_status lf_model_info(const lf_model* model, int* image_size, int* n_patches,
                               int64_t* parameter_count);
LF_API lf_status lf_model_checksum(const lf_model* model, uint64_t* out);
/* ref and cur are size*size 8-bit binary images (0 or 255). mu and log_var
 * receive n_patches*6 doubles, row-major. */
LF_API lf_status lf_model_encode(const lf_model* model, const uint8_t* ref, const uint8_t* cur,
                                 int size, double* mu, double* log_var);
/* z holds n_patches*6 doubles; out receives size*size values in [0, 1]. */
LF_API lf_status lf_model_decode(const lf_model* model, const uint8_t* ref, int size,
                                 const double* z, double* out);

LF_API lf_status lf_simgen(const lf_config* cfg, const char* out_dir);
LF_API lf_status lf_train(const char* dataset_dir, const lf_config* cfg, const char* out_checkpoint);
/* episode may be NULL or empty for the first test episode. */
LF_API lf_status lf_reconstruct(const char* checkpoint, const char* dataset_dir,
                                const char* episode, int frame, const char* out_png);
LF_API lf_status lf_analyze(const char* checkpoint, const char* dataset_dir, const char* split,
                            const lf_config* cfg, const char* out_prefix);
/* head may name a missing file, in which case a head is trained and saved
 * there. target_dir may be NULL to reuse source_dir. */
LF_API lf_status lf_evalzs(const char* checkpoint, const char* head, const char* source,
                           const char* target, const char* source_dir, const char* target_dir,
                           const lf_config* cfg, const char* out_json);

#ifdef __cplusplus
}
#endif

#endif /* LATENTFORCE_H_ */
