#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core/config.hpp"
#include "core/corpus.hpp"
#include "core/pipeline.hpp"
#include "core/provider.hpp"
#include "core/vector_index.hpp"

namespace omgm {

// --- metrics ---------------------------------------------------------------

/// Fraction of samples whose first `k` ranked ids contain the gold id.
double recall_at_k(const std::vector<std::vector<std::string>>& ranked,
                   const std::vector<std::string>& gold, std::size_t k);

struct SectionHit {
  std::string entity_id;
  int section_index = 0;
};

/// Fraction of samples whose top-1 (entity, section) equals the gold pair.
double section_recall_at_1(std::span<const SectionHit> predicted, std::span<const SectionHit> gold);

/// Lowercase, collapse whitespace, strip terminal punctuation and a leading
/// "a"/"an"/"the".
std::string normalize_answer(std::string_view text);

/// 1 iff the normalized prediction equals any normalized valid answer.
int vqa_accuracy(std::string_view prediction, std::span<const std::string> valid_answers);

/// First number appearing in `text` (thousands separators allowed).
std::optional<double> parse_prediction_number(std::string_view text);

/// Scalar gold g: |pred - g| <= tolerance * |g| (exact when g == 0).
/// Range gold [a, b]: a <= pred <= b. Unparseable predictions score 0.
int relaxed_accuracy(std::string_view prediction, const NumericGold& gold, double tolerance);

// --- latency ---------------------------------------------------------------

struct LatencyStats {
  std::size_t count = 0;
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double max = 0.0;
};

/// Nearest-rank percentiles over the given wall-clock samples.
LatencyStats summarize_latency(std::span<const double> values_ms);

/// Per-stage aggregation ("stage1", "stage2", "stage3", "generate",
/// "retrieval" = stage1 + stage2). Stages with no samples are omitted.
std::map<std::string, LatencyStats> measure_latency(std::span<const StageTimings> runs);

// --- results and reports ---------------------------------------------------

/// One parsed results-file line.
struct ResultRecord {
  std::string sample_id;
  std::vector<std::string> stage1;
  std::vector<std::string> stage2;
  std::string top1_entity;
  int best_section_index = -1;
  std::optional<std::string> answer;
  std::optional<StageTimings> timings;
  std::optional<std::string> error;
};

ResultRecord record_from_outcome(const SampleOutcome& outcome);
std::vector<ResultRecord> parse_results(std::string_view jsonl);
std::vector<ResultRecord> load_results(const std::string& path);

struct EvalReport {
  nlohmann::ordered_json config;
  std::map<std::size_t, double> recall;         // final (reranked) ranking
  std::map<std::size_t, double> stage1_recall;  // coarse ranking only
  std::optional<double> section_recall_1;
  std::optional<double> vqa_acc;
  std::optional<double> relaxed_acc;
  std::map<std::string, LatencyStats> latency;
  std::size_t evaluated = 0;
  std::size_t failed = 0;
  nlohmann::ordered_json samples = nlohmann::ordered_json::array();

  nlohmann::ordered_json to_json() const;
};

/// Scores results against gold samples. Samples without a gold entity are
/// skipped for recall; failed runs count as misses.
EvalReport evaluate(std::span<const ResultRecord> results, std::span<const QuerySample> gold,
                    const RunConfig& config);

// --- sweeps ----------------------------------------------------------------

enum class SweepParam { kAlpha, kBeta, kK };
SweepParam parse_sweep_param(const std::string& s);
const char* to_string(SweepParam p);

struct Benchmark {
  Corpus corpus;
  VectorIndex index;
  std::vector<QuerySample> samples;
};

struct SweepRow {
  double value = 0.0;
  std::vector<std::pair<std::string, double>> metrics;  // ordered
  std::map<std::string, LatencyStats> latency;          // empty in parallel mode
  EvalReport report;
};

/// One full evaluation per grid value. Alpha and beta points share an
/// embedding cache; k points each start cold so their latencies compare.
/// With config.pipeline.parallelism > 1 latency is not reported.
std::vector<SweepRow> sweep(SweepParam param, std::span<const double> grid,
                            const Benchmark& benchmark, std::shared_ptr<const Provider> provider,
                            const RunConfig& config);

/// Header "param,value,metric,metric_value,latency_ms_mean"; latency is the
/// mean retrieval time (stage one + stage two).
std::string sweep_csv(SweepParam param, std::span<const SweepRow> rows);
nlohmann::ordered_json sweep_json(SweepParam param, std::span<const SweepRow> rows,
                                  const RunConfig& config);

// --- planted benchmark -----------------------------------------------------

struct PlantedOptions {
  std::size_t entities = 500;
  std::size_t samples = 200;
  std::size_t min_sections = 2;
  std::size_t max_sections = 5;
  std::size_t imageless = 0;         // trailing entities without a main image
  double noise_fraction = 0.0;       // samples whose query image leans to a distractor
  double gold_weight = 0.58;         // seed weights of a noisy query image
  double distractor_weight = 0.6;
  std::size_t vocabulary = 5000;
  std::size_t words_per_section = 40;
  std::size_t question_terms = 4;
  std::uint64_t seed = 7;
};

struct PlantedBenchmark {
  Corpus corpus;
  std::vector<QuerySample> samples;
  std::vector<std::string> noisy_samples;
};

/// Synthetic corpus whose embeddings are planted through seed directives:
/// each query image shares its key with the gold summary, and each question
/// shares its key (and some words) with the gold evidence section.
PlantedBenchmark make_planted_benchmark(const PlantedOptions& options);

}  // namespace omgm
