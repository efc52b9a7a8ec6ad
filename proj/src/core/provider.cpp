#include <cmath>

#include "core/error.hpp"
#include "core/provider.hpp"

namespace omgm {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void l2_normalize(std::span<double> v) {
  const double n = l2_norm(v);
  if (n == 0.0) return;
  for (auto& x : v) x /= n;
}

TokenMatrix Provider::embed_fused(const ImageRef& image, const std::string& text) const {
  const FusedInput in{image, text};
  auto out = embed_fused(std::span<const FusedInput>(&in, 1));
  return std::move(out.at(0));
}

// ---------------------------------------------------------------------------

namespace {

std::string image_key(const ImageRef& img) {
  return img.ref_id + '\x1f' + img.uri + '\x1f' + img.bytes_b64;
}

// Looks up every key, forwards the misses to `compute` as one batch.
template <typename Value, typename Input, typename KeyFn, typename ComputeFn>
std::vector<Value> memoized(std::mutex& mu, std::unordered_map<std::string, Value>& cache,
                            std::size_t& hits, std::size_t& misses, std::span<const Input> inputs,
                            KeyFn key_of, ComputeFn compute) {
  std::vector<Value> out(inputs.size());
  std::vector<Input> todo;
  std::vector<std::size_t> slots;
  {
    std::lock_guard lock(mu);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const auto it = cache.find(key_of(inputs[i]));
      if (it != cache.end()) {
        out[i] = it->second;
        ++hits;
      } else {
        todo.push_back(inputs[i]);
        slots.push_back(i);
      }
    }
  }
  if (todo.empty()) return out;
  auto fresh = compute(std::span<const Input>(todo));
  std::lock_guard lock(mu);
  misses += todo.size();
  for (std::size_t j = 0; j < todo.size(); ++j) {
    cache.emplace(key_of(todo[j]), fresh[j]);
    out[slots[j]] = std::move(fresh[j]);
  }
  return out;
}

}  // namespace

CachingProvider::CachingProvider(std::shared_ptr<const Provider> inner) : inner_(std::move(inner)) {
  if (!inner_) throw Error(ErrorCode::kInvalidArgument, "caching provider needs a provider");
}

std::vector<DenseVector> CachingProvider::embed_text(std::span<const std::string> texts) const {
  if (texts.empty()) throw Error(ErrorCode::kInvalidArgument, "embed_text: empty batch");
  return memoized<DenseVector, std::string>(
      mu_, text_, hits_, misses_, texts, [](const std::string& t) { return t; },
      [this](std::span<const std::string> in) { return inner_->embed_text(in); });
}

std::vector<DenseVector> CachingProvider::embed_image(std::span<const ImageRef> images) const {
  if (images.empty()) throw Error(ErrorCode::kInvalidArgument, "embed_image: empty batch");
  return memoized<DenseVector, ImageRef>(
      mu_, image_, hits_, misses_, images, image_key,
      [this](std::span<const ImageRef> in) { return inner_->embed_image(in); });
}

std::vector<TokenMatrix> CachingProvider::embed_fused(std::span<const FusedInput> inputs) const {
  if (inputs.empty()) throw Error(ErrorCode::kInvalidArgument, "embed_fused: empty batch");
  return memoized<TokenMatrix, FusedInput>(
      mu_, fused_, hits_, misses_, inputs,
      [](const FusedInput& f) { return image_key(f.image) + '\x1e' + f.text; },
      [this](std::span<const FusedInput> in) { return inner_->embed_fused(in); });
}

std::vector<double> CachingProvider::score_text_pairs(const std::string& question,
                                                      std::span<const std::string> passages) const {
  if (passages.empty()) throw Error(ErrorCode::kInvalidArgument, "score_text_pairs: no passages");
  return memoized<double, std::string>(
      mu_, scores_, hits_, misses_, passages,
      [&question](const std::string& p) { return question + '\x1e' + p; },
      [&](std::span<const std::string> in) { return inner_->score_text_pairs(question, in); });
}

std::string CachingProvider::generate(const std::string& prompt,
                                      const GenerateParams& params) const {
  const std::string key = std::to_string(params.max_tokens) + '\x1e' + prompt;
  {
    std::lock_guard lock(mu_);
    if (const auto it = generated_.find(key); it != generated_.end()) {
      ++hits_;
      return it->second;
    }
  }
  auto text = inner_->generate(prompt, params);
  std::lock_guard lock(mu_);
  ++misses_;
  generated_.emplace(key, text);
  return text;
}

std::size_t CachingProvider::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::size_t CachingProvider::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

}  // namespace omgm
