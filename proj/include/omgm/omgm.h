/* omgm: coarse-to-fine multimodal retrieval engine, C interface. */
#ifndef OMGM_OMGM_H
#define OMGM_OMGM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define OMGM_API __declspec(dllexport)
#elif defined(__GNUC__)
#define OMGM_API __attribute__((visibility("default")))
#else
#define OMGM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum omgm_status {
  OMGM_OK = 0,
  OMGM_ERR_INVALID_ARGUMENT = 1,
  OMGM_ERR_IO = 2,
  OMGM_ERR_PARSE = 3,
  OMGM_ERR_DUPLICATE_ID = 4,
  OMGM_ERR_NOT_FOUND = 5,
  OMGM_ERR_DIMS_MISMATCH = 6,
  OMGM_ERR_TRANSPORT = 7,
  OMGM_ERR_PROTOCOL = 8,
  OMGM_ERR_CORRUPT = 9,
  OMGM_ERR_VERSION = 10,
  OMGM_ERR_CONSISTENCY = 11,
  OMGM_ERR_RESOLUTION = 12,
  OMGM_ERR_INTERNAL = 13
} omgm_status;

typedef struct omgm_config omgm_config;
typedef struct omgm_corpus omgm_corpus;
typedef struct omgm_provider omgm_provider;
typedef struct omgm_index omgm_index;

OMGM_API const char* omgm_version(void);
OMGM_API const char* omgm_status_name(omgm_status status);

/* Message of the last failed call on this thread; "" after a success. */
OMGM_API const char* omgm_last_error(void);

/* Frees strings returned through char** out-parameters. */
OMGM_API void omgm_string_free(char* s);

/* --- configuration --- */

OMGM_API omgm_status omgm_config_create(omgm_config** out);
OMGM_API void omgm_config_destroy(omgm_config* config);
/* Dotted keys ("pipeline.alpha") or flat aliases ("alpha", "provider_url"). */
OMGM_API omgm_status omgm_config_set(omgm_config* config, const char* key, const char* value);
OMGM_API omgm_status omgm_config_load_file(omgm_config* config, const char* path);
/* Applies OMGM_PROVIDER_URL, OMGM_SEED and OMGM_PARALLELISM. */
OMGM_API omgm_status omgm_config_apply_env(omgm_config* config);
OMGM_API omgm_status omgm_config_validate(const omgm_config* config);
OMGM_API omgm_status omgm_config_to_json(const omgm_config* config, char** out_json);

/* --- corpus --- */

OMGM_API omgm_status omgm_corpus_load(const char* path, const omgm_config* config,
                                      omgm_corpus** out);
OMGM_API void omgm_corpus_destroy(omgm_corpus* corpus);
OMGM_API size_t omgm_corpus_size(const omgm_corpus* corpus);
OMGM_API omgm_status omgm_corpus_save(const omgm_corpus* corpus, const char* path);
OMGM_API omgm_status omgm_corpus_manifest(const omgm_corpus* corpus, char** out_json);
/* summaries_json: {"entity_id": "summary", ...}. Produces a new corpus. */
OMGM_API omgm_status omgm_corpus_attach_summaries(const omgm_corpus* corpus,
                                                  const char* summaries_json, omgm_corpus** out);

/* Sections of a raw article as a JSON array of {index, heading, body}. */
OMGM_API omgm_status omgm_segment_article(const char* text, size_t max_chars,
                                          size_t max_paragraphs, char** out_json);

/* --- provider --- */

/* Deterministic provider when provider.url is empty, HTTP client otherwise. */
OMGM_API omgm_status omgm_provider_create(const omgm_config* config, omgm_provider** out);
OMGM_API void omgm_provider_destroy(omgm_provider* provider);
OMGM_API omgm_status omgm_provider_id(const omgm_provider* provider, char** out_id);

/* --- index --- */

OMGM_API omgm_status omgm_index_build(const omgm_corpus* corpus, const omgm_provider* provider,
                                      const omgm_config* config, omgm_index** out);
OMGM_API omgm_status omgm_index_load(const char* path, omgm_index** out);
OMGM_API void omgm_index_destroy(omgm_index* index);
OMGM_API omgm_status omgm_index_save(const omgm_index* index, const char* path);
OMGM_API size_t omgm_index_size(const omgm_index* index);
OMGM_API size_t omgm_index_dims(const omgm_index* index);
/* Top-k hits as a JSON array of {"record_id", "score"}. */
OMGM_API omgm_status omgm_index_search(const omgm_index* index, const double* query, size_t dims,
                                       size_t k, char** out_json);

/* --- commands ---
 * Each writes its output files and, when out_json is non-null, a short JSON
 * summary. Domain errors name the failing module in omgm_last_error(). */

OMGM_API omgm_status omgm_ingest(const char* corpus_path, const char* out_path,
                                 const omgm_config* config, char** out_json);
OMGM_API omgm_status omgm_summarize(const char* corpus_path, const char* cache_path,
                                    const char* out_path, const omgm_provider* provider,
                                    const omgm_config* config, char** out_json);
OMGM_API omgm_status omgm_index_corpus(const char* corpus_path, const char* out_path,
                                       const omgm_provider* provider, const omgm_config* config,
                                       char** out_json);
OMGM_API omgm_status omgm_query(const char* samples_path, const char* corpus_path,
                                const char* index_path, const char* out_path,
                                const omgm_provider* provider, const omgm_config* config,
                                char** out_json);
OMGM_API omgm_status omgm_evaluate(const char* results_path, const char* samples_path,
                                   const char* out_path, const omgm_config* config,
                                   char** out_json);
/* param: "alpha", "beta" or "k". */
OMGM_API omgm_status omgm_sweep(const char* param, const double* grid, size_t grid_len,
                                const char* samples_path, const char* corpus_path,
                                const char* index_path, const char* out_csv,
                                const omgm_provider* provider, const omgm_config* config,
                                char** out_json);
OMGM_API omgm_status omgm_export_pairs(const char* samples_path, const char* corpus_path,
                                       const char* index_path, const char* out_path,
                                       const omgm_provider* provider, const omgm_config* config,
                                       char** out_json);
/* options_json keys: entities, samples, min_sections, max_sections, imageless,
 * noise_fraction, seed. Missing keys keep their defaults. */
OMGM_API omgm_status omgm_synth_benchmark(const char* options_json, const char* out_dir,
                                          const omgm_provider* provider,
                                          const omgm_config* config, char** out_json);

#ifdef __cplusplus
}
#endif

#endif /* OMGM_OMGM_H */
