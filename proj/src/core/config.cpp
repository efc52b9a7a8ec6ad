#include "core/config.hpp"

#include <charconv>

#include "core/error.hpp"

namespace omgm {

namespace {

std::string trimmed(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorCode::kInvalidArgument,
              "config " + key + ": \"" + value + "\" is not " + expected);
}

double as_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

template <typename Int>
Int as_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::size_t> as_size_list(const std::string& key, std::string v) {
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto comma = v.find(',', pos);
    const auto item = trimmed(v.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (!item.empty()) out.push_back(as_int<std::size_t>(key, item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) bad_value(key, v, "a non-empty list");
  return out;
}

}  // namespace

ScoreNorm parse_score_norm(const std::string& s) {
  if (s == "minmax") return ScoreNorm::kMinMax;
  if (s == "by_query_len") return ScoreNorm::kByQueryLen;
  if (s == "none") return ScoreNorm::kNone;
  throw Error(ErrorCode::kInvalidArgument, "unknown score_norm \"" + s + "\"");
}

ImagelessPolicy parse_imageless_policy(const std::string& s) {
  if (s == "placeholder-image" || s == "placeholder") return ImagelessPolicy::kPlaceholder;
  if (s == "demote") return ImagelessPolicy::kDemote;
  throw Error(ErrorCode::kInvalidArgument, "unknown imageless policy \"" + s + "\"");
}

PromptStyle parse_prompt_style(const std::string& s) {
  if (s == "evqa") return PromptStyle::kEvqa;
  if (s == "infoseek") return PromptStyle::kInfoseek;
  if (s == "summary") return PromptStyle::kSummary;
  throw Error(ErrorCode::kInvalidArgument, "unknown prompt style \"" + s + "\"");
}

const char* to_string(ScoreNorm v) {
  switch (v) {
    case ScoreNorm::kMinMax: return "minmax";
    case ScoreNorm::kByQueryLen: return "by_query_len";
    case ScoreNorm::kNone: return "none";
  }
  return "?";
}

const char* to_string(ImagelessPolicy v) {
  return v == ImagelessPolicy::kPlaceholder ? "placeholder-image" : "demote";
}

const char* to_string(PromptStyle v) {
  switch (v) {
    case PromptStyle::kEvqa: return "evqa";
    case PromptStyle::kInfoseek: return "infoseek";
    case PromptStyle::kSummary: return "summary";
  }
  return "?";
}

void PipelineConfig::validate() const {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "pipeline.k must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "pipeline.alpha must lie in [0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "pipeline.beta must lie in [0, 1]");
  if (!(temperature > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "pipeline.temperature must be positive");
  if (parallelism < 1) throw Error(ErrorCode::kInvalidArgument, "pipeline.parallelism must be >= 1");
}

void RunConfig::validate() const {
  pipeline.validate();
  if (pairs.pairs_per_sample < 2)
    throw Error(ErrorCode::kInvalidArgument, "pairs.pairs_per_sample must be >= 2");
  if (!(eval.relaxed_tolerance >= 0.0))
    throw Error(ErrorCode::kInvalidArgument, "eval.relaxed_tolerance must be >= 0");
  if (segmentation.max_chars == 0)
    throw Error(ErrorCode::kInvalidArgument, "segmentation.max_chars must be positive");
  if (provider.max_batch < 1) throw Error(ErrorCode::kInvalidArgument, "provider.max_batch must be >= 1");
}

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  std::string key = raw_key;
  const std::string v = trimmed(raw_value);
  for (auto& c : key)
    if (c == '-') c = '_';
  // Flat aliases used by flags and environment variables.
  if (key == "k" || key == "alpha" || key == "beta" || key == "score_norm" ||
      key == "temperature" || key == "parallelism" || key == "imageless")
    key = "pipeline." + key;
  else if (key == "provider_url")
    key = "provider.url";
  else if (key == "seed" || key == "style" || key == "with_generation" || key == "max_tokens" ||
           key == "record_timings")
    key = "run." + key;

  if (key == "pipeline.k") pipeline.k = as_int<std::size_t>(key, v);
  else if (key == "pipeline.alpha") pipeline.alpha = as_double(key, v);
  else if (key == "pipeline.beta") pipeline.beta = as_double(key, v);
  else if (key == "pipeline.score_norm") pipeline.score_norm = parse_score_norm(v);
  else if (key == "pipeline.temperature") pipeline.temperature = as_double(key, v);
  else if (key == "pipeline.imageless") pipeline.imageless = parse_imageless_policy(v);
  else if (key == "pipeline.normalize_embeddings") pipeline.normalize_embeddings = as_bool(key, v);
  else if (key == "pipeline.parallelism") pipeline.parallelism = as_int<std::size_t>(key, v);
  else if (key == "pairs.pairs_per_sample") pairs.pairs_per_sample = as_int<std::size_t>(key, v);
  else if (key == "pairs.max_hard_negatives") pairs.max_hard_negatives = as_int<std::size_t>(key, v);
  else if (key == "eval.relaxed_tolerance") eval.relaxed_tolerance = as_double(key, v);
  else if (key == "eval.recall_ks") eval.recall_ks = as_size_list(key, v);
  else if (key == "provider.url") provider.url = v;
  else if (key == "provider.dense_dims") provider.dense_dims = as_int<std::size_t>(key, v);
  else if (key == "provider.fused_dims") provider.fused_dims = as_int<std::size_t>(key, v);
  else if (key == "provider.max_text_chars") provider.max_text_chars = as_int<std::size_t>(key, v);
  else if (key == "provider.timeout_ms") provider.timeout_ms = as_int<std::int64_t>(key, v);
  else if (key == "provider.max_batch") provider.max_batch = as_int<std::size_t>(key, v);
  else if (key == "provider.max_attempts") provider.max_attempts = as_int<int>(key, v);
  else if (key == "segmentation.max_chars") segmentation.max_chars = as_int<std::size_t>(key, v);
  else if (key == "segmentation.max_paragraphs") segmentation.max_paragraphs = as_int<std::size_t>(key, v);
  else if (key == "run.seed") seed = as_int<std::uint64_t>(key, v);
  else if (key == "run.style") style = parse_prompt_style(v);
  else if (key == "run.with_generation") with_generation = as_bool(key, v);
  else if (key == "run.record_timings") record_timings = as_bool(key, v);
  else if (key == "run.max_tokens") max_tokens = as_int<int>(key, v);
  else throw Error(ErrorCode::kInvalidArgument, "unknown config key \"" + raw_key + "\"");
}

void RunConfig::parse_file_contents(const std::string& text) {
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trimmed(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trimmed(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::kParse, "config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trimmed(line.substr(0, eq));
    std::string value = trimmed(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    try {
      set(section.empty() ? key : section + "." + key, value);
    } catch (const Error& e) {
      throw Error(e.code(), "config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::string& path) { parse_file_contents(read_file(path)); }

void RunConfig::apply_env(const std::function<std::optional<std::string>(const char*)>& getenv) {
  if (auto v = getenv("OMGM_PROVIDER_URL")) set("provider.url", *v);
  if (auto v = getenv("OMGM_SEED")) set("run.seed", *v);
  if (auto v = getenv("OMGM_PARALLELISM")) set("pipeline.parallelism", *v);
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["pipeline"] = {{"k", pipeline.k},
                   {"alpha", pipeline.alpha},
                   {"beta", pipeline.beta},
                   {"score_norm", to_string(pipeline.score_norm)},
                   {"temperature", pipeline.temperature},
                   {"imageless", to_string(pipeline.imageless)},
                   {"normalize_embeddings", pipeline.normalize_embeddings},
                   {"parallelism", pipeline.parallelism}};
  j["pairs"] = {{"pairs_per_sample", pairs.pairs_per_sample},
                {"max_hard_negatives", pairs.max_hard_negatives}};
  j["eval"] = {{"relaxed_tolerance", eval.relaxed_tolerance}, {"recall_ks", eval.recall_ks}};
  j["provider"] = {{"url", provider.url},
                   {"dense_dims", provider.dense_dims},
                   {"fused_dims", provider.fused_dims},
                   {"max_text_chars", provider.max_text_chars},
                   {"timeout_ms", provider.timeout_ms},
                   {"max_batch", provider.max_batch},
                   {"max_attempts", provider.max_attempts}};
  j["segmentation"] = {{"max_chars", segmentation.max_chars},
                       {"max_paragraphs", segmentation.max_paragraphs}};
  j["run"] = {{"seed", seed},
              {"style", to_string(style)},
              {"with_generation", with_generation},
              {"record_timings", record_timings},
              {"max_tokens", max_tokens}};
  return j;
}

}  // namespace omgm
