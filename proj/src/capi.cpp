#include "omgm/omgm.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "core/commands.hpp"
#include "core/corpus.hpp"
#include "core/error.hpp"
#include "core/vector_index.hpp"

struct omgm_config {
  omgm::RunConfig value;
};

struct omgm_corpus {
  omgm::Corpus value;
};

struct omgm_provider {
  std::shared_ptr<const omgm::Provider> value;
};

struct omgm_index {
  omgm::VectorIndex value;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
omgm_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    g_last_error.clear();
    return OMGM_OK;
  } catch (const omgm::Error& e) {
    g_last_error = e.what();
    return static_cast<omgm_status>(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return OMGM_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return OMGM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return OMGM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return OMGM_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (!p) throw omgm::Error(omgm::ErrorCode::kInvalidArgument, std::string(name) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void emit(const nlohmann::ordered_json& j, char** out_json) {
  if (out_json) *out_json = dup_string(j.dump());
}

const omgm::RunConfig& config_of(const omgm_config* config) {
  static const omgm::RunConfig kDefaults;
  return config ? config->value : kDefaults;
}

}  // namespace

extern "C" {

const char* omgm_version(void) { return omgm::kEngineVersion; }

const char* omgm_status_name(omgm_status status) {
  if (status == OMGM_OK) return "ok";
  return omgm::error_code_name(static_cast<omgm::ErrorCode>(status));
}

const char* omgm_last_error(void) { return g_last_error.c_str(); }

void omgm_string_free(char* s) { std::free(s); }

omgm_status omgm_config_create(omgm_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new omgm_config{};
  });
}

void omgm_config_destroy(omgm_config* config) { delete config; }

omgm_status omgm_config_set(omgm_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->value.set(key, value);
  });
}

omgm_status omgm_config_load_file(omgm_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    config->value.load_file(path);
  });
}

omgm_status omgm_config_apply_env(omgm_config* config) {
  return guarded([&] {
    require(config, "config");
    config->value.apply_env([](const char* name) -> std::optional<std::string> {
      if (const char* v = std::getenv(name)) return std::string(v);
      return std::nullopt;
    });
  });
}

omgm_status omgm_config_validate(const omgm_config* config) {
  return guarded([&] {
    require(config, "config");
    config->value.validate();
  });
}

omgm_status omgm_config_to_json(const omgm_config* config, char** out_json) {
  return guarded([&] {
    require(config, "config");
    require(out_json, "out_json");
    emit(config->value.to_json(), out_json);
  });
}

omgm_status omgm_corpus_load(const char* path, const omgm_config* config, omgm_corpus** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto corpus = omgm::load_corpus(path, omgm::CorpusFormat::kJsonl, config_of(config).segmentation);
    *out = new omgm_corpus{std::move(corpus)};
  });
}

void omgm_corpus_destroy(omgm_corpus* corpus) { delete corpus; }

size_t omgm_corpus_size(const omgm_corpus* corpus) { return corpus ? corpus->value.size() : 0; }

omgm_status omgm_corpus_save(const omgm_corpus* corpus, const char* path) {
  return guarded([&] {
    require(corpus, "corpus");
    require(path, "path");
    omgm::persist_corpus(corpus->value, path);
  });
}

omgm_status omgm_corpus_manifest(const omgm_corpus* corpus, char** out_json) {
  return guarded([&] {
    require(corpus, "corpus");
    require(out_json, "out_json");
    emit(omgm::validate_corpus(corpus->value).to_json(), out_json);
  });
}

omgm_status omgm_corpus_attach_summaries(const omgm_corpus* corpus, const char* summaries_json,
                                         omgm_corpus** out) {
  return guarded([&] {
    require(corpus, "corpus");
    require(summaries_json, "summaries_json");
    require(out, "out");
    const auto j = nlohmann::json::parse(summaries_json);
    auto summaries = j.get<std::map<std::string, std::string>>();
    *out = new omgm_corpus{omgm::attach_summaries(corpus->value, summaries)};
  });
}

omgm_status omgm_segment_article(const char* text, size_t max_chars, size_t max_paragraphs,
                                 char** out_json) {
  return guarded([&] {
    require(text, "text");
    require(out_json, "out_json");
    const auto sections = omgm::segment_article(text, {max_chars, max_paragraphs});
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : sections)
      arr.push_back({{"index", s.index}, {"heading", s.heading}, {"body", s.body}});
    emit(arr, out_json);
  });
}

omgm_status omgm_provider_create(const omgm_config* config, omgm_provider** out) {
  return guarded([&] {
    require(out, "out");
    *out = new omgm_provider{omgm::make_provider(config_of(config))};
  });
}

void omgm_provider_destroy(omgm_provider* provider) { delete provider; }

omgm_status omgm_provider_id(const omgm_provider* provider, char** out_id) {
  return guarded([&] {
    require(provider, "provider");
    require(out_id, "out_id");
    *out_id = dup_string(provider->value->id());
  });
}

omgm_status omgm_index_build(const omgm_corpus* corpus, const omgm_provider* provider,
                             const omgm_config* config, omgm_index** out) {
  return guarded([&] {
    require(corpus, "corpus");
    require(provider, "provider");
    require(out, "out");
    auto index = omgm::index_corpus(corpus->value, *provider->value,
                                    config_of(config).pipeline.normalize_embeddings, 0);
    *out = new omgm_index{std::move(index)};
  });
}

omgm_status omgm_index_load(const char* path, omgm_index** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new omgm_index{omgm::load_index(path)};
  });
}

void omgm_index_destroy(omgm_index* index) { delete index; }

omgm_status omgm_index_save(const omgm_index* index, const char* path) {
  return guarded([&] {
    require(index, "index");
    require(path, "path");
    omgm::persist_index(index->value, path);
  });
}

size_t omgm_index_size(const omgm_index* index) { return index ? index->value.size() : 0; }

size_t omgm_index_dims(const omgm_index* index) { return index ? index->value.dims() : 0; }

omgm_status omgm_index_search(const omgm_index* index, const double* query, size_t dims,
                              size_t k, char** out_json) {
  return guarded([&] {
    require(index, "index");
    require(query, "query");
    require(out_json, "out_json");
    const auto hits = index->value.search({query, dims}, k);
    auto arr = nlohmann::ordered_json::array();
    for (const auto& h : hits) arr.push_back({{"record_id", h.record_id}, {"score", h.score}});
    emit(arr, out_json);
  });
}

omgm_status omgm_ingest(const char* corpus_path, const char* out_path, const omgm_config* config,
                        char** out_json) {
  return guarded([&] {
    require(corpus_path, "corpus_path");
    require(out_path, "out_path");
    emit(omgm::cmd_ingest(corpus_path, out_path, config_of(config)), out_json);
  });
}

omgm_status omgm_summarize(const char* corpus_path, const char* cache_path, const char* out_path,
                           const omgm_provider* provider, const omgm_config* config,
                           char** out_json) {
  return guarded([&] {
    require(corpus_path, "corpus_path");
    require(cache_path, "cache_path");
    require(out_path, "out_path");
    require(provider, "provider");
    emit(omgm::cmd_summarize(corpus_path, cache_path, out_path, *provider->value, config_of(config)),
         out_json);
  });
}

omgm_status omgm_index_corpus(const char* corpus_path, const char* out_path,
                              const omgm_provider* provider, const omgm_config* config,
                              char** out_json) {
  return guarded([&] {
    require(corpus_path, "corpus_path");
    require(out_path, "out_path");
    require(provider, "provider");
    emit(omgm::cmd_index(corpus_path, out_path, *provider->value, config_of(config)), out_json);
  });
}

omgm_status omgm_query(const char* samples_path, const char* corpus_path, const char* index_path,
                       const char* out_path, const omgm_provider* provider,
                       const omgm_config* config, char** out_json) {
  return guarded([&] {
    require(samples_path, "samples_path");
    require(corpus_path, "corpus_path");
    require(index_path, "index_path");
    require(out_path, "out_path");
    require(provider, "provider");
    emit(omgm::cmd_query(samples_path, corpus_path, index_path, out_path, *provider->value,
                         config_of(config)),
         out_json);
  });
}

omgm_status omgm_evaluate(const char* results_path, const char* samples_path,
                          const char* out_path, const omgm_config* config, char** out_json) {
  return guarded([&] {
    require(results_path, "results_path");
    require(samples_path, "samples_path");
    require(out_path, "out_path");
    emit(omgm::cmd_eval(results_path, samples_path, out_path, config_of(config)), out_json);
  });
}

omgm_status omgm_sweep(const char* param, const double* grid, size_t grid_len,
                       const char* samples_path, const char* corpus_path, const char* index_path,
                       const char* out_csv, const omgm_provider* provider,
                       const omgm_config* config, char** out_json) {
  return guarded([&] {
    require(param, "param");
    require(grid, "grid");
    require(samples_path, "samples_path");
    require(corpus_path, "corpus_path");
    require(index_path, "index_path");
    require(out_csv, "out_csv");
    require(provider, "provider");
    emit(omgm::cmd_sweep(omgm::parse_sweep_param(param), {grid, grid_len}, samples_path,
                         corpus_path, index_path, out_csv, provider->value, config_of(config)),
         out_json);
  });
}

omgm_status omgm_export_pairs(const char* samples_path, const char* corpus_path,
                              const char* index_path, const char* out_path,
                              const omgm_provider* provider, const omgm_config* config,
                              char** out_json) {
  return guarded([&] {
    require(samples_path, "samples_path");
    require(corpus_path, "corpus_path");
    require(index_path, "index_path");
    require(out_path, "out_path");
    require(provider, "provider");
    emit(omgm::cmd_export_pairs(samples_path, corpus_path, index_path, out_path, *provider->value,
                                config_of(config)),
         out_json);
  });
}

omgm_status omgm_synth_benchmark(const char* options_json, const char* out_dir,
                                 const omgm_provider* provider, const omgm_config* config,
                                 char** out_json) {
  return guarded([&] {
    require(out_dir, "out_dir");
    require(provider, "provider");
    omgm::PlantedOptions o;
    if (options_json && *options_json) {
      const auto j = nlohmann::json::parse(options_json);
      o.entities = j.value("entities", o.entities);
      o.samples = j.value("samples", o.samples);
      o.min_sections = j.value("min_sections", o.min_sections);
      o.max_sections = j.value("max_sections", o.max_sections);
      o.imageless = j.value("imageless", o.imageless);
      o.noise_fraction = j.value("noise_fraction", o.noise_fraction);
      o.seed = j.value("seed", o.seed);
    }
    emit(omgm::cmd_synth(o, out_dir, *provider->value, config_of(config)), out_json);
  });
}

}  // extern "C"
