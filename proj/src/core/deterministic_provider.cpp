#include <charconv>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>

#include "core/error.hpp"
#include "core/provider.hpp"

namespace omgm {

namespace {

constexpr std::string_view kPlaceholderKey = "omgm:placeholder";

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Box-Muller over mt19937_64 so the stream is identical on every standard library.
void fill_unit_gaussian(std::uint64_t seed, std::span<double> out) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  for (std::size_t i = 0; i < out.size(); i += 2) {
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    out[i] = r * std::cos(theta);
    if (i + 1 < out.size()) out[i + 1] = r * std::sin(theta);
  }
  l2_normalize(out);
}

std::vector<double> mixed_vector(const std::vector<std::pair<std::uint64_t, double>>& seeds,
                                 std::size_t dims) {
  std::vector<double> acc(dims, 0.0);
  std::vector<double> tmp(dims);
  for (const auto& [seed, weight] : seeds) {
    fill_unit_gaussian(seed, tmp);
    for (std::size_t i = 0; i < dims; ++i) acc[i] += weight * tmp[i];
  }
  l2_normalize(acc);
  return acc;
}

bool is_token_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::set<std::string> tokens_of(std::string_view text) {
  std::set<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (is_token_char(c)) {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!cur.empty()) {
      out.insert(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(std::move(cur));
  return out;
}

void resolve_image(const ImageRef& image) {
  if (image.inline_bytes()) {
    if (base64::decode(image.bytes_b64).empty())
      throw Error(ErrorCode::kResolution, "image " + image.ref_id + ": empty inline payload");
    return;
  }
  const std::string_view uri = image.uri;
  if (uri.starts_with("synth:")) return;
  std::string path(uri);
  if (uri.starts_with("file://")) path = std::string(uri.substr(7));
  else if (uri.find("://") != std::string_view::npos)
    throw Error(ErrorCode::kResolution,
                "image " + image.ref_id + ": cannot resolve \"" + path + "\" offline");
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw Error(ErrorCode::kResolution, "image " + image.ref_id + ": \"" + path + "\" not found");
}

std::vector<std::pair<std::uint64_t, double>> seeds_of(const std::vector<SeedTerm>& terms) {
  std::vector<std::pair<std::uint64_t, double>> out;
  out.reserve(terms.size());
  for (const auto& t : terms) out.emplace_back(seed_of_key(t.key), t.weight);
  return out;
}

}  // namespace

std::optional<SeedDirective> parse_seed_directive(std::string_view input) {
  constexpr std::string_view kOpen = "[seed:";
  if (!input.starts_with(kOpen)) return std::nullopt;
  const auto close = input.find(']');
  if (close == std::string_view::npos) return std::nullopt;
  std::string_view body = input.substr(kOpen.size(), close - kOpen.size());
  SeedDirective d;
  while (!body.empty()) {
    const auto plus = body.find('+');
    std::string_view term = body.substr(0, plus);
    SeedTerm t;
    const auto star = term.rfind('*');
    if (star != std::string_view::npos) {
      const auto w = term.substr(star + 1);
      const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), t.weight);
      if (ec != std::errc{} || ptr != w.data() + w.size()) return std::nullopt;
      term = term.substr(0, star);
    }
    if (term.empty()) return std::nullopt;
    t.key = std::string(term);
    d.terms.push_back(std::move(t));
    if (plus == std::string_view::npos) break;
    body.remove_prefix(plus + 1);
  }
  if (d.terms.empty()) return std::nullopt;
  d.rest = input.substr(close + 1);
  while (!d.rest.empty() && d.rest.front() == ' ') d.rest.remove_prefix(1);
  return d;
}

std::string_view strip_seed_directive(std::string_view input) {
  if (auto d = parse_seed_directive(input)) return d->rest;
  return input;
}

std::uint64_t seed_of_key(std::string_view key) {
  return key == kPlaceholderKey ? 0 : fnv1a64(key);
}

const ImageRef& placeholder_image() {
  static const ImageRef kPlaceholder{std::string(kPlaceholderKey), "synth:placeholder", ""};
  return kPlaceholder;
}

double token_overlap(std::string_view question, std::string_view passage) {
  const auto q = tokens_of(question);
  if (q.empty()) return 0.0;
  const auto p = tokens_of(passage);
  std::size_t shared = 0;
  for (const auto& t : q) shared += p.count(t);
  return static_cast<double>(shared) / static_cast<double>(q.size());
}

DeterministicProvider::DeterministicProvider(DeterministicOptions options) : options_(options) {
  if (options_.dense_dims == 0 || options_.fused_dims == 0 || options_.max_text_chars == 0)
    throw Error(ErrorCode::kInvalidArgument, "deterministic provider: dimensions must be positive");
}

std::string DeterministicProvider::id() const {
  return "deterministic/v1/d" + std::to_string(options_.dense_dims) + "/f" +
         std::to_string(options_.fused_dims) + "/t" + std::to_string(options_.max_text_chars);
}

std::vector<SeedTerm> DeterministicProvider::text_terms(const std::string& text,
                                                        bool& truncated) const {
  if (auto d = parse_seed_directive(text)) {
    truncated = d->rest.size() > options_.max_text_chars;
    return d->terms;
  }
  truncated = text.size() > options_.max_text_chars;
  return {SeedTerm{text.substr(0, options_.max_text_chars), 1.0}};
}

std::vector<SeedTerm> DeterministicProvider::image_terms(const ImageRef& image) const {
  if (image.ref_id.empty()) throw Error(ErrorCode::kInvalidArgument, "image with empty ref_id");
  resolve_image(image);
  if (auto d = parse_seed_directive(image.ref_id)) return d->terms;
  return {SeedTerm{image.ref_id, 1.0}};
}

std::vector<DenseVector> DeterministicProvider::embed_text(
    std::span<const std::string> texts) const {
  if (texts.empty()) throw Error(ErrorCode::kInvalidArgument, "embed_text: empty batch");
  std::vector<DenseVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    if (t.empty()) throw Error(ErrorCode::kInvalidArgument, "embed_text: empty text");
    bool truncated = false;
    const auto terms = text_terms(t, truncated);
    out.push_back({mixed_vector(seeds_of(terms), options_.dense_dims), true, truncated});
  }
  return out;
}

std::vector<DenseVector> DeterministicProvider::embed_image(
    std::span<const ImageRef> images) const {
  if (images.empty()) throw Error(ErrorCode::kInvalidArgument, "embed_image: empty batch");
  std::vector<DenseVector> out;
  out.reserve(images.size());
  for (const auto& img : images)
    out.push_back({mixed_vector(seeds_of(image_terms(img)), options_.dense_dims), true, false});
  return out;
}

std::vector<TokenMatrix> DeterministicProvider::embed_fused(
    std::span<const FusedInput> inputs) const {
  if (inputs.empty()) throw Error(ErrorCode::kInvalidArgument, "embed_fused: empty batch");
  std::vector<TokenMatrix> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (in.text.empty()) throw Error(ErrorCode::kInvalidArgument, "embed_fused: empty text");
    bool truncated = false;
    const auto image_seeds = seeds_of(image_terms(in.image));
    const auto text_seeds = seeds_of(text_terms(in.text, truncated));
    TokenMatrix m{kFusedRows, options_.fused_dims, {}, truncated};
    m.values.reserve(kFusedRows * options_.fused_dims);
    for (std::size_t r = 0; r < kFusedRows; ++r) {
      std::vector<std::pair<std::uint64_t, double>> row_seeds;
      for (const auto& [is, iw] : image_seeds)
        for (const auto& [ts, tw] : text_seeds)
          row_seeds.emplace_back(splitmix64(is ^ splitmix64(ts ^ splitmix64(r))), iw * tw);
      const auto row = mixed_vector(row_seeds, options_.fused_dims);
      m.values.insert(m.values.end(), row.begin(), row.end());
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<double> DeterministicProvider::score_text_pairs(
    const std::string& question, std::span<const std::string> passages) const {
  if (passages.empty()) throw Error(ErrorCode::kInvalidArgument, "score_text_pairs: no passages");
  const auto q = strip_seed_directive(question);
  std::vector<double> out;
  out.reserve(passages.size());
  for (const auto& p : passages) out.push_back(token_overlap(q, strip_seed_directive(p)));
  return out;
}

std::string DeterministicProvider::generate(const std::string& prompt,
                                            const GenerateParams&) const {
  if (prompt.empty()) throw Error(ErrorCode::kInvalidArgument, "generate: empty prompt");
  // First 64 code points, never splitting a UTF-8 sequence.
  std::size_t pos = 0;
  for (int cp = 0; cp < 64 && pos < prompt.size(); ++cp) {
    ++pos;
    while (pos < prompt.size() && (static_cast<unsigned char>(prompt[pos]) & 0xC0) == 0x80) ++pos;
  }
  return "ECHO:" + prompt.substr(0, pos);
}

}  // namespace omgm
