#ifndef LOGER_LOGER_H
#define LOGER_LOGER_H

/* C interface to the loger recommender. Every call returns a loger_status; on
 * failure loger_last_error() describes the most recent error of the calling
 * thread. Strings returned through char** are owned by the caller and released
 * with loger_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LOGER_API __declspec(dllexport)
#else
#define LOGER_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum loger_status {
  LOGER_OK = 0,
  LOGER_ERR_IO = 1,
  LOGER_ERR_PARSE = 2,
  LOGER_ERR_SCHEMA = 3,
  LOGER_ERR_CONFIG = 4,
  LOGER_ERR_RANGE = 5,
  LOGER_ERR_TYPE = 6,
  LOGER_ERR_NUMERIC = 7,
  LOGER_ERR_TRAINING = 8,
  LOGER_ERR_ORACLE_SCALE = 9,
  LOGER_ERR_EMPTY = 10,
  LOGER_ERR_GENERATION = 11,
  LOGER_ERR_INTERNAL = 12,
  LOGER_ERR_ARGUMENT = 13
} loger_status;

typedef struct loger_config loger_config;
typedef struct loger_model loger_model;

LOGER_API const char* loger_last_error(void);
LOGER_API const char* loger_status_name(loger_status status);
LOGER_API void loger_string_free(char* s);

/* Configuration: defaults, file loading, flat key access. */
LOGER_API loger_status loger_config_new(loger_config** out);
LOGER_API loger_status loger_config_load(const char* path, loger_config** out);
LOGER_API loger_status loger_config_set(loger_config* config, const char* key, const char* value);
LOGER_API loger_status loger_config_get(const loger_config* config, const char* key, char** value);
LOGER_API loger_status loger_config_dump(const loger_config* config, char** text);
/* Newline-separated `key<TAB>help` lines for every key. */
LOGER_API loger_status loger_config_keys(char** text);
LOGER_API void loger_config_free(loger_config* config);

/* Loads triples and a schema, splits and writes the dataset directory named by the
 * config key `dataset`. *stats receives the statistics table. */
LOGER_API loger_status loger_ingest(const loger_config* config, const char* triples_path,
                                    const char* schema_path, char** stats);

/* Trains on `dataset` and writes checkpoints to `output`. *log receives the log. */
LOGER_API loger_status loger_train(const loger_config* config, char** log);

/* Loads the dataset and checkpoints named by the config. */
LOGER_API loger_status loger_model_load(const loger_config* config, loger_model** out);
LOGER_API void loger_model_free(loger_model* model);

/* users: newline-separated entity names. *recommendations receives one record per
 * item (or per unknown user); *paths one explanation path per line. Either output
 * pointer may be NULL. */
LOGER_API loger_status loger_model_recommend(const loger_model* model, const char* users, size_t topk,
                                             char** recommendations, char** paths);

/* Ranking and faithfulness report on the test split. */
LOGER_API loger_status loger_model_evaluate(const loger_model* model, char** report);

/* Ranking table per hidden-set size. */
LOGER_API loger_status loger_sweep_hidden(const loger_config* config, const size_t* sizes, size_t count,
                                          char** table);

/* Writes triples.tsv, schema.cfg and planted.txt into out_dir. */
LOGER_API loger_status loger_synth(const loger_config* config, const char* out_dir, char** summary);

/* Oracle self-checks; returns LOGER_ERR_INTERNAL if any check fails. */
LOGER_API loger_status loger_selftest(uint64_t seed, char** report);

#ifdef __cplusplus
}
#endif

#endif
