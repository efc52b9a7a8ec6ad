#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "core/corpus.hpp"

namespace omgm {

enum class ScoreNorm { kMinMax, kByQueryLen, kNone };
enum class ImagelessPolicy { kPlaceholder, kDemote };
enum class PromptStyle { kEvqa, kInfoseek, kSummary };

ScoreNorm parse_score_norm(const std::string& s);
ImagelessPolicy parse_imageless_policy(const std::string& s);
PromptStyle parse_prompt_style(const std::string& s);
const char* to_string(ScoreNorm v);
const char* to_string(ImagelessPolicy v);
const char* to_string(PromptStyle v);

struct PipelineConfig {
  std::size_t k = 20;
  double alpha = 0.9;
  double beta = 0.2;
  ScoreNorm score_norm = ScoreNorm::kMinMax;
  double temperature = 1.0;
  ImagelessPolicy imageless = ImagelessPolicy::kPlaceholder;
  bool normalize_embeddings = true;
  std::size_t parallelism = 1;

  void validate() const;
};

struct PairConfig {
  std::size_t pairs_per_sample = 16;
  std::size_t max_hard_negatives = 3;
};

struct EvalConfig {
  double relaxed_tolerance = 0.10;
  std::vector<std::size_t> recall_ks{1, 5, 10, 20};
};

struct ProviderConfig {
  std::string url;  // empty selects the deterministic provider
  std::size_t dense_dims = 256;
  std::size_t fused_dims = 64;
  std::size_t max_text_chars = 8192;
  std::int64_t timeout_ms = 30000;
  std::size_t max_batch = 32;
  int max_attempts = 3;
};

/// Fully resolved configuration for one command invocation.
/// Precedence: flags > OMGM_* environment > config file > defaults.
struct RunConfig {
  PipelineConfig pipeline;
  PairConfig pairs;
  EvalConfig eval;
  ProviderConfig provider;
  SegmentationPolicy segmentation;
  std::uint64_t seed = 0;
  PromptStyle style = PromptStyle::kEvqa;
  bool with_generation = false;
  bool record_timings = false;
  int max_tokens = 64;

  /// Accepts "section.key" or a flat flag alias ("alpha", "provider_url", ...).
  void set(const std::string& key, const std::string& value);
  void load_file(const std::string& path);
  void parse_file_contents(const std::string& text);
  /// Reads OMGM_PROVIDER_URL, OMGM_SEED and OMGM_PARALLELISM through `getenv`.
  void apply_env(const std::function<std::optional<std::string>(const char*)>& getenv);
  void validate() const;

  nlohmann::ordered_json to_json() const;
};

}  // namespace omgm
