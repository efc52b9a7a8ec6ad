#pragma once

#include <memory>
#include <span>
#include <string>

#include "core/config.hpp"
#include "core/eval.hpp"
#include "core/provider.hpp"

namespace omgm {

inline constexpr const char* kEngineVersion = "0.1.0";

/// {"engine_version", "command", "config"} block embedded in every artifact.
nlohmann::ordered_json provenance(const std::string& command, const RunConfig& config);

/// Deterministic provider when config.provider.url is empty, HTTP otherwise.
std::shared_ptr<const Provider> make_provider(const RunConfig& config);

// Each command reads its inputs, writes its outputs and returns a short JSON
// summary. Domain errors carry the failing module as a message prefix.

nlohmann::ordered_json cmd_ingest(const std::string& corpus_path, const std::string& out,
                                  const RunConfig& config);

/// Summaries are cached in `cache_path` keyed by (entity_id, prompt hash);
/// entities that already carry a summary are left alone.
nlohmann::ordered_json cmd_summarize(const std::string& corpus_path, const std::string& cache_path,
                                     const std::string& out, const Provider& provider,
                                     const RunConfig& config);

nlohmann::ordered_json cmd_index(const std::string& corpus_path, const std::string& out,
                                 const Provider& provider, const RunConfig& config);

nlohmann::ordered_json cmd_query(const std::string& samples_path, const std::string& corpus_path,
                                 const std::string& index_path, const std::string& out,
                                 const Provider& provider, const RunConfig& config);

nlohmann::ordered_json cmd_eval(const std::string& results_path, const std::string& samples_path,
                                const std::string& out, const RunConfig& config);

/// Writes the CSV to `out` and the JSON form next to it (extension ".json").
nlohmann::ordered_json cmd_sweep(SweepParam param, std::span<const double> grid,
                                 const std::string& samples_path, const std::string& corpus_path,
                                 const std::string& index_path, const std::string& out,
                                 std::shared_ptr<const Provider> provider, const RunConfig& config);

nlohmann::ordered_json cmd_export_pairs(const std::string& samples_path,
                                        const std::string& corpus_path,
                                        const std::string& index_path, const std::string& out,
                                        const Provider& provider, const RunConfig& config);

/// Writes corpus.jsonl, samples.jsonl and index.bin of a planted benchmark
/// into `out_dir`.
nlohmann::ordered_json cmd_synth(const PlantedOptions& options, const std::string& out_dir,
                                 const Provider& provider, const RunConfig& config);

}  // namespace omgm
