#include "core/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>

#include "core/error.hpp"
#include "core/pipeline.hpp"
#include "core/reranker_kit.hpp"

namespace omgm {

using nlohmann::ordered_json;

namespace {

template <typename Fn>
auto in_module(const char* module, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    rethrow_with_context(e, module);
  }
}

std::string prompt_hash(const std::string& prompt) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : prompt) h = (h ^ c) * 0x100000001b3ULL;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::int64_t build_time() {
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end != epoch && *end == '\0') return v;
  }
  return static_cast<std::int64_t>(std::time(nullptr));
}

ordered_json header_line(const std::string& command, const RunConfig& config) {
  return ordered_json{{"omgm_header", provenance(command, config)}};
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open \"" + path + "\" for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.close();
  if (out.fail()) throw Error(ErrorCode::kIo, "write to \"" + path + "\" failed");
}

Corpus read_corpus(const std::string& path, const RunConfig& config) {
  return in_module("kb-corpus", [&] { return load_corpus(path, CorpusFormat::kJsonl, config.segmentation); });
}

std::vector<QuerySample> read_samples(const std::string& path) {
  return in_module("kb-corpus", [&] { return load_samples(path); });
}

VectorIndex read_index(const std::string& path) {
  return in_module("vector-index", [&] { return load_index(path); });
}

RunOptions run_options(const RunConfig& config) {
  return RunOptions{config.with_generation, config.style, GenerateParams{config.max_tokens}};
}

}  // namespace

ordered_json provenance(const std::string& command, const RunConfig& config) {
  return ordered_json{
      {"engine_version", kEngineVersion}, {"command", command}, {"config", config.to_json()}};
}

std::shared_ptr<const Provider> make_provider(const RunConfig& config) {
  return in_module("providers", [&]() -> std::shared_ptr<const Provider> {
    const auto& p = config.provider;
    if (p.url.empty())
      return std::make_shared<DeterministicProvider>(
          DeterministicOptions{p.dense_dims, p.fused_dims, p.max_text_chars});
    ProviderEndpoint ep;
    ep.base_url = p.url;
    ep.timeout = std::chrono::milliseconds(p.timeout_ms);
    ep.max_batch = p.max_batch;
    ep.retry.max_attempts = p.max_attempts;
    ep.parallelism = std::max<std::size_t>(1, config.pipeline.parallelism);
    return std::make_shared<HttpProvider>(ep);
  });
}

ordered_json cmd_ingest(const std::string& corpus_path, const std::string& out,
                        const RunConfig& config) {
  const Corpus corpus = read_corpus(corpus_path, config);
  return in_module("kb-corpus", [&] {
    const auto manifest = validate_corpus(corpus);
    persist_corpus(corpus, out);
    ordered_json m = manifest.to_json();
    m["provenance"] = provenance("ingest", config);
    write_file(out + ".manifest.json", m.dump(2) + "\n");
    return m;
  });
}

ordered_json cmd_summarize(const std::string& corpus_path, const std::string& cache_path,
                           const std::string& out, const Provider& provider,
                           const RunConfig& config) {
  const Corpus corpus = read_corpus(corpus_path, config);

  // cache key: entity_id + '\n' + prompt hash
  std::map<std::string, std::string> cache;
  std::vector<std::string> cache_order;
  in_module("kb-corpus", [&] {
    std::error_code ec;
    if (!std::filesystem::exists(cache_path, ec)) return;
    for_each_line(read_file(cache_path), [&](std::size_t line_no, std::string_view line) {
      try {
        const auto j = nlohmann::json::parse(line);
        if (j.contains("omgm_header")) return;
        const auto key = j.at("entity_id").get<std::string>() + '\n' +
                         j.at("prompt_hash").get<std::string>();
        if (cache.emplace(key, j.at("summary").get<std::string>()).second) cache_order.push_back(key);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kParse, "summary cache line " + std::to_string(line_no) + ": " + e.what());
      }
    });
  });

  std::map<std::string, std::string> summaries;
  std::size_t existing = 0, cached = 0, generated = 0;
  in_module("providers", [&] {
    for (const auto& e : corpus.entities()) {
      if (e.summary && !e.summary->empty()) {
        ++existing;
        continue;
      }
      const auto prompt = summary_prompt(e);
      const auto key = e.entity_id + '\n' + prompt_hash(prompt);
      auto it = cache.find(key);
      if (it == cache.end()) {
        auto text = provider.generate(prompt, GenerateParams{config.max_tokens});
        it = cache.emplace(key, std::move(text)).first;
        cache_order.push_back(key);
        ++generated;
      } else {
        ++cached;
      }
      summaries[e.entity_id] = it->second;
    }
  });

  return in_module("kb-corpus", [&] {
    auto cache_out = open_out(cache_path);
    cache_out << header_line("summarize", config).dump() << '\n';
    for (const auto& key : cache_order) {
      const auto nl = key.find('\n');
      cache_out << ordered_json{{"entity_id", key.substr(0, nl)},
                                {"prompt_hash", key.substr(nl + 1)},
                                {"summary", cache.at(key)}}
                       .dump()
                << '\n';
    }
    finish(cache_out, cache_path);
    persist_corpus(attach_summaries(corpus, summaries), out);
    return ordered_json{{"entities", corpus.size()},
                        {"existing", existing},
                        {"cached", cached},
                        {"generated", generated}};
  });
}

ordered_json cmd_index(const std::string& corpus_path, const std::string& out,
                       const Provider& provider, const RunConfig& config) {
  const Corpus corpus = read_corpus(corpus_path, config);
  auto index = in_module("vector-index", [&] {
    return index_corpus(corpus, provider, config.pipeline.normalize_embeddings, build_time());
  });
  return in_module("vector-index", [&] {
    IndexMetadata meta = index.metadata();
    meta.provenance = provenance("index", config);
    std::vector<VectorIndex::Entry> entries;
    entries.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
      const auto v = index.vector_at(i);
      entries.emplace_back(index.id_at(i), DenseVector{{v.begin(), v.end()}, meta.normalized, false});
    }
    const auto stamped = VectorIndex::build(std::move(entries), meta);
    persist_index(stamped, out);
    return ordered_json{{"entries", stamped.size()},
                        {"dims", stamped.dims()},
                        {"provider_id", meta.provider_id},
                        {"truncated", meta.truncated_ids.size()}};
  });
}

ordered_json cmd_query(const std::string& samples_path, const std::string& corpus_path,
                       const std::string& index_path, const std::string& out,
                       const Provider& provider, const RunConfig& config) {
  const auto samples = read_samples(samples_path);
  const Corpus corpus = read_corpus(corpus_path, config);
  const VectorIndex index = read_index(index_path);
  in_module("retrieval-pipeline", [&] {
    config.pipeline.validate();
    check_same_provider(index, provider);
  });
  const auto outcomes = run_batch(samples, corpus, index, provider, config.pipeline, run_options(config));
  return in_module("retrieval-pipeline", [&] {
    auto file = open_out(out);
    ordered_json header = header_line("query", config);
    header["omgm_header"]["provider_id"] = provider.id();
    file << header.dump() << '\n';
    std::size_t failed = 0;
    for (const auto& o : outcomes) {
      if (!o.result) ++failed;
      file << result_to_json(o, config.record_timings).dump() << '\n';
    }
    finish(file, out);
    return ordered_json{{"samples", outcomes.size()}, {"failed", failed}};
  });
}

ordered_json cmd_eval(const std::string& results_path, const std::string& samples_path,
                      const std::string& out, const RunConfig& config) {
  const auto samples = read_samples(samples_path);
  return in_module("eval", [&] {
    const auto results = load_results(results_path);
    ordered_json report = evaluate(results, samples, config).to_json();
    report["provenance"] = provenance("eval", config);
    write_file(out, report.dump(2) + "\n");
    return ordered_json{{"metrics", report["metrics"]}};
  });
}

ordered_json cmd_sweep(SweepParam param, std::span<const double> grid,
                       const std::string& samples_path, const std::string& corpus_path,
                       const std::string& index_path, const std::string& out,
                       std::shared_ptr<const Provider> provider, const RunConfig& config) {
  Benchmark bench{read_corpus(corpus_path, config), read_index(index_path), read_samples(samples_path)};
  in_module("retrieval-pipeline", [&] { check_same_provider(bench.index, *provider); });
  return in_module("eval", [&] {
    const auto rows = sweep(param, grid, bench, provider, config);
    write_file(out, sweep_csv(param, rows));
    ordered_json j = sweep_json(param, rows, config);
    j["provenance"] = provenance("sweep", config);
    const auto json_path = std::filesystem::path(out).replace_extension(".json").string();
    write_file(json_path, j.dump(2) + "\n");
    return ordered_json{{"points", rows.size()}, {"csv", out}, {"json", json_path}};
  });
}

ordered_json cmd_export_pairs(const std::string& samples_path, const std::string& corpus_path,
                              const std::string& index_path, const std::string& out,
                              const Provider& provider, const RunConfig& config) {
  const auto samples = read_samples(samples_path);
  const Corpus corpus = read_corpus(corpus_path, config);
  const VectorIndex index = read_index(index_path);
  in_module("retrieval-pipeline", [&] { check_same_provider(index, provider); });
  return in_module("reranker-kit", [&] {
    const auto header = header_line("export-pairs", config);
    PairWriter writer(out, &header);
    std::size_t skipped = 0;
    for (const auto& s : samples) {
      if (!s.gold_entity_id || !s.gold_section_index) {
        ++skipped;
        continue;
      }
      const auto stage1 = stage1_search(s.image, corpus, index, provider, config.pipeline.k);
      writer.write(build_pairs(s, stage1, corpus, provider, config.pairs, config.seed));
    }
    writer.close();
    if (writer.written() == 0)
      throw Error(ErrorCode::kInvalidArgument, "no sample carries a gold entity and section");
    return ordered_json{{"written", writer.written()}, {"skipped", skipped}};
  });
}

ordered_json cmd_synth(const PlantedOptions& options, const std::string& out_dir,
                       const Provider& provider, const RunConfig& config) {
  return in_module("eval", [&] {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create \"" + out_dir + "\": " + ec.message());
    const auto bench = make_planted_benchmark(options);
    const auto dir = std::filesystem::path(out_dir);
    persist_corpus(bench.corpus, (dir / "corpus.jsonl").string());
    write_file((dir / "samples.jsonl").string(), serialize_samples(bench.samples));
    auto index = index_corpus(bench.corpus, provider, config.pipeline.normalize_embeddings, 0);
    persist_index(index, (dir / "index.bin").string());
    return ordered_json{{"entities", bench.corpus.size()},
                        {"samples", bench.samples.size()},
                        {"noisy_samples", bench.noisy_samples.size()}};
  });
}

}  // namespace omgm
