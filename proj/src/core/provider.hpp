#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "core/corpus.hpp"

namespace omgm {

/// Row count of every fused query/candidate matrix.
inline constexpr std::size_t kFusedRows = 32;

struct DenseVector {
  std::vector<double> values;
  bool normalized = false;
  bool truncated = false;  // input text was cut to the provider's limit

  std::size_t dims() const noexcept { return values.size(); }
};

/// Row-major `rows x dims` matrix of token embeddings.
struct TokenMatrix {
  std::size_t rows = 0;
  std::size_t dims = 0;
  std::vector<double> values;
  bool truncated = false;

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * dims, dims};
  }
};

struct FusedInput {
  ImageRef image;
  std::string text;
};

struct GenerateParams {
  int max_tokens = 64;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
/// Scales `v` to unit length; zero vectors are left untouched.
void l2_normalize(std::span<double> v);

/// Boundary to every learned component. Implementations must be safe for
/// concurrent calls.
class Provider {
 public:
  virtual ~Provider() = default;

  /// Stable identity of the embedding space; indices record it.
  virtual std::string id() const = 0;

  virtual std::vector<DenseVector> embed_text(std::span<const std::string> texts) const = 0;
  virtual std::vector<DenseVector> embed_image(std::span<const ImageRef> images) const = 0;
  virtual std::vector<TokenMatrix> embed_fused(std::span<const FusedInput> inputs) const = 0;
  virtual std::vector<double> score_text_pairs(const std::string& question,
                                               std::span<const std::string> passages) const = 0;
  virtual std::string generate(const std::string& prompt, const GenerateParams& params) const = 0;

  TokenMatrix embed_fused(const ImageRef& image, const std::string& text) const;
};

/// Placeholder used for entities that have no main image.
const ImageRef& placeholder_image();

// ---------------------------------------------------------------------------
// Deterministic offline provider.
//
// Inputs may start with a seed directive "[seed:key*w+key2*w2]" which names
// the generator keys (and weights) instead of the input bytes. Planted test
// corpora use it to give an image and a text the same embedding.

struct SeedTerm {
  std::string key;
  double weight = 1.0;
};

struct SeedDirective {
  std::vector<SeedTerm> terms;
  std::string_view rest;  // input after the directive
};

std::optional<SeedDirective> parse_seed_directive(std::string_view input);
std::string_view strip_seed_directive(std::string_view input);
std::uint64_t seed_of_key(std::string_view key);

struct DeterministicOptions {
  std::size_t dense_dims = 256;
  std::size_t fused_dims = 64;
  std::size_t max_text_chars = 8192;
};

class DeterministicProvider final : public Provider {
 public:
  explicit DeterministicProvider(DeterministicOptions options = {});

  std::string id() const override;
  std::vector<DenseVector> embed_text(std::span<const std::string> texts) const override;
  std::vector<DenseVector> embed_image(std::span<const ImageRef> images) const override;
  using Provider::embed_fused;
  std::vector<TokenMatrix> embed_fused(std::span<const FusedInput> inputs) const override;
  std::vector<double> score_text_pairs(const std::string& question,
                                       std::span<const std::string> passages) const override;
  std::string generate(const std::string& prompt, const GenerateParams& params) const override;

  const DeterministicOptions& options() const noexcept { return options_; }

 private:
  std::vector<SeedTerm> text_terms(const std::string& text, bool& truncated) const;
  std::vector<SeedTerm> image_terms(const ImageRef& image) const;

  DeterministicOptions options_;
};

/// Token-overlap ratio |tokens(q) ∩ tokens(p)| / |tokens(q)| over lowercase
/// alphanumeric tokens.
double token_overlap(std::string_view question, std::string_view passage);

// ---------------------------------------------------------------------------
// HTTP client for the model-serving sidecar.

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{200};
};

struct ProviderEndpoint {
  std::string base_url;
  std::chrono::milliseconds timeout{30000};
  std::size_t max_batch = 32;
  RetryPolicy retry;
  std::size_t parallelism = 4;
};

class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(ProviderEndpoint endpoint);
  ~HttpProvider() override;

  std::string id() const override;
  std::vector<DenseVector> embed_text(std::span<const std::string> texts) const override;
  std::vector<DenseVector> embed_image(std::span<const ImageRef> images) const override;
  using Provider::embed_fused;
  std::vector<TokenMatrix> embed_fused(std::span<const FusedInput> inputs) const override;
  std::vector<double> score_text_pairs(const std::string& question,
                                       std::span<const std::string> passages) const override;
  std::string generate(const std::string& prompt, const GenerateParams& params) const override;

  nlohmann::json health() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

namespace wire {

/// Request item for an image: inline bytes travel as image_b64, local files
/// are read and encoded, anything else is forwarded as image_uri.
nlohmann::json image_item(const ImageRef& image);
nlohmann::json embed_text_request(std::span<const std::string> texts);
nlohmann::json embed_image_request(std::span<const ImageRef> images);
nlohmann::json embed_fused_request(std::span<const FusedInput> inputs);
nlohmann::json score_pairs_request(const std::string& query, std::span<const std::string> passages);
nlohmann::json generate_request(const std::string& prompt, const GenerateParams& params);

std::vector<DenseVector> parse_dense_response(const nlohmann::json& body, std::size_t expected);
std::vector<TokenMatrix> parse_fused_response(const nlohmann::json& body, std::size_t expected);
std::vector<double> parse_scores_response(const nlohmann::json& body, std::size_t expected);
std::string parse_generate_response(const nlohmann::json& body);

}  // namespace wire

// ---------------------------------------------------------------------------

/// Memoizes another provider. Identity is the wrapped provider's identity.
class CachingProvider final : public Provider {
 public:
  explicit CachingProvider(std::shared_ptr<const Provider> inner);

  std::string id() const override { return inner_->id(); }
  std::vector<DenseVector> embed_text(std::span<const std::string> texts) const override;
  std::vector<DenseVector> embed_image(std::span<const ImageRef> images) const override;
  using Provider::embed_fused;
  std::vector<TokenMatrix> embed_fused(std::span<const FusedInput> inputs) const override;
  std::vector<double> score_text_pairs(const std::string& question,
                                       std::span<const std::string> passages) const override;
  std::string generate(const std::string& prompt, const GenerateParams& params) const override;

  std::size_t hits() const;
  std::size_t misses() const;

 private:
  std::shared_ptr<const Provider> inner_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, DenseVector> text_;
  mutable std::unordered_map<std::string, DenseVector> image_;
  mutable std::unordered_map<std::string, TokenMatrix> fused_;
  mutable std::unordered_map<std::string, double> scores_;
  mutable std::unordered_map<std::string, std::string> generated_;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

namespace base64 {
std::string encode(std::string_view bytes);
/// Throws Error(kResolution) on malformed input.
std::string decode(std::string_view text);
}  // namespace base64

}  // namespace omgm
