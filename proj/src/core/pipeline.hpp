#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/corpus.hpp"
#include "core/error.hpp"
#include "core/provider.hpp"
#include "core/vector_index.hpp"

namespace omgm {

struct StageOneResult {
  std::string entity_id;
  double sim_c = 0.0;
};

struct StageTwoResult {
  std::string entity_id;
  double sim_c = 0.0;
  std::vector<double> section_sims;  // indexed by section index
  double sim_m_max = 0.0;
  double fused = 0.0;
  bool placeholder_image = false;  // scored against the placeholder image
  bool demoted = false;            // imageless entity pushed to the bottom
  bool truncated = false;
};

struct FinalContext {
  std::string entity_id;
  std::string entity_title;
  SectionRecord section;
  double sim_m = 0.0;
  double sim_t = 0.0;
  double fused_section = 0.0;
};

/// Error raised by run_pipeline, tagged with the stage that failed.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), stage + ": " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct QueryInput {
  ImageRef image;
  std::string question;
};

// --- scoring primitives ----------------------------------------------------

/// Late-interaction score: sum over query rows of the best inner product
/// against any candidate row.
double maxsim(const TokenMatrix& query, const TokenMatrix& candidate);

/// minmax maps to [0, 1] (all-equal input gives 0.5); by_query_len divides
/// by `query_rows`; none is the identity.
std::vector<double> normalize_scores(std::span<const double> values, ScoreNorm mode,
                                     std::size_t query_rows = kFusedRows);

/// Normalization applied to bounded signals (sim_c, sim_t): minmax under
/// minmax, identity otherwise.
std::vector<double> normalize_bounded(std::span<const double> values, ScoreNorm mode);

/// weight * norm(primary) + (1 - weight) * norm(secondary), element-wise.
std::vector<double> fuse_weighted(std::span<const double> primary,
                                  std::span<const double> secondary, double weight);

/// Fills `fused` for every candidate and orders them: fused descending,
/// ties by lower entity_id; demoted candidates go last by sim_c.
std::vector<StageTwoResult> fuse_and_rank(std::vector<StageTwoResult> candidates, double alpha,
                                          ScoreNorm mode);

struct SectionChoice {
  std::size_t index = 0;
  std::vector<double> fused;  // per section
};

/// argmax over sections of beta * norm(sim_m) + (1 - beta) * norm(sim_t);
/// ties go to the lower section index.
SectionChoice choose_section(std::span<const double> sim_m, std::span<const double> sim_t,
                             double beta, ScoreNorm mode);

// --- stages ----------------------------------------------------------------

/// Fails with kConsistency if the index was built by a different provider.
void check_same_provider(const VectorIndex& index, const Provider& provider);

std::vector<StageOneResult> stage1_search(const ImageRef& query_image, const Corpus& corpus,
                                          const VectorIndex& index, const Provider& provider,
                                          std::size_t k);

StageTwoResult entity_multimodal_score(const TokenMatrix& query_matrix,
                                       const EntityRecord& entity, const Provider& provider,
                                       ImagelessPolicy policy);
StageTwoResult entity_multimodal_score(const QueryInput& query, const EntityRecord& entity,
                                       const Provider& provider, ImagelessPolicy policy);

std::vector<StageTwoResult> rerank_entities(const std::vector<StageOneResult>& stage1,
                                            const QueryInput& query, const Corpus& corpus,
                                            const Provider& provider, const PipelineConfig& config);

FinalContext select_section(const StageTwoResult& top1, const std::string& question,
                            const Corpus& corpus, const Provider& provider,
                            const PipelineConfig& config);

// --- prompts ---------------------------------------------------------------

enum class GeneratorKind { kLlm, kMllm };

/// "# Wiki Article: <title>\n## Section Title: <heading>\n<body>"
std::string render_context(const std::string& title, const SectionRecord& section);
std::string render_article(const EntityRecord& entity);

std::string assemble_prompt(const FinalContext& context, const std::string& question,
                            PromptStyle style, GeneratorKind kind = GeneratorKind::kLlm);
std::string summary_prompt(const EntityRecord& entity);

// --- end to end ------------------------------------------------------------

struct StageTimings {
  double stage1_ms = 0.0;
  double stage2_ms = 0.0;
  double stage3_ms = 0.0;
  std::optional<double> generate_ms;
};

struct PipelineResult {
  std::string sample_id;
  std::vector<StageOneResult> stage1;
  std::vector<StageTwoResult> stage2;
  FinalContext context;
  std::optional<std::string> answer;
  StageTimings timings;
  std::vector<std::string> placeholder_entities;
  bool truncated = false;
};

struct RunOptions {
  bool with_generation = false;
  PromptStyle style = PromptStyle::kEvqa;
  GenerateParams generate;
};

PipelineResult run_pipeline(const QuerySample& sample, const Corpus& corpus,
                            const VectorIndex& index, const Provider& provider,
                            const PipelineConfig& config, const RunOptions& options = {});

struct SampleOutcome {
  std::string sample_id;
  std::optional<PipelineResult> result;
  std::optional<std::string> error_stage;
  std::optional<Error> error;
};

/// Runs every sample, up to config.parallelism at a time; output order
/// follows input order. A failing sample records its error and the stage.
std::vector<SampleOutcome> run_batch(std::span<const QuerySample> samples, const Corpus& corpus,
                                     const VectorIndex& index, const Provider& provider,
                                     const PipelineConfig& config, const RunOptions& options = {});

/// One results-file line. Timings are null unless `with_timings`.
nlohmann::ordered_json result_to_json(const SampleOutcome& outcome, bool with_timings);

/// Embeds summaries and builds the stage-one index.
VectorIndex index_corpus(const Corpus& corpus, const Provider& provider, bool normalize,
                         std::int64_t build_timestamp);

}  // namespace omgm
