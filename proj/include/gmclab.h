#ifndef GMCLAB_H
#define GMCLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Opaque study configuration; create with parse/load, release with free. */
typedef struct gmclab_config_s gmclab_config;

enum {
  GMCLAB_OK = 0,
  GMCLAB_ERR_ARGUMENT = 1,
  GMCLAB_ERR_VALIDATION = 2,
  GMCLAB_ERR_NUMERICAL = 3,
  GMCLAB_ERR_IO = 4,
  GMCLAB_ERR_INTERNAL = 5
};

const char* gmclab_version(void);

/* Message from the most recent failing call on this thread; "" after any
   success. */
const char* gmclab_last_error(void);

int gmclab_config_parse(const char* json, gmclab_config** out);
int gmclab_config_load(const char* path, gmclab_config** out);
int gmclab_config_validate(const gmclab_config* cfg);

/* Study kind as spelled in the config, owned by cfg. */
const char* gmclab_config_kind(const gmclab_config* cfg);

int gmclab_config_set_seed(gmclab_config* cfg, uint64_t seed);
int gmclab_config_set_out_dir(gmclab_config* cfg, const char* dir);
int gmclab_config_set_workers(gmclab_config* cfg, size_t workers);
void gmclab_config_free(gmclab_config* cfg);

/* Runs the study, writes its artifacts under the configured output
   directory, and on success stores a malloc'd manifest JSON string in
   *manifest_json for the caller to release with gmclab_string_free. */
int gmclab_run(const gmclab_config* cfg, char** manifest_json);
void gmclab_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
