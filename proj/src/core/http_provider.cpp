#include <cmath>
#include <filesystem>
#include <semaphore>
#include <thread>

#include "core/error.hpp"
#include "core/provider.hpp"
#include "httplib.h"

namespace omgm {

using nlohmann::json;

namespace wire {

namespace {

constexpr double kNormTolerance = 1e-6;

[[noreturn]] void protocol(const std::string& what) {
  throw Error(ErrorCode::kProtocol, "provider protocol: " + what);
}

std::size_t positive_size(const json& body, const char* key) {
  if (!body.contains(key) || !body.at(key).is_number_integer() || body.at(key).get<long long>() <= 0)
    protocol(std::string("\"") + key + "\" must be a positive integer");
  return body.at(key).get<std::size_t>();
}

std::vector<double> numbers(const json& arr, std::size_t expected, const char* what) {
  if (!arr.is_array() || arr.size() != expected)
    protocol(std::string(what) + " has " + std::to_string(arr.is_array() ? arr.size() : 0) +
             " values, expected " + std::to_string(expected));
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : arr) {
    if (!v.is_number()) protocol(std::string(what) + " contains a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<bool> truncation_flags(const json& body, std::size_t expected) {
  std::vector<bool> flags(expected, false);
  if (!body.contains("truncated")) return flags;
  const auto& t = body.at("truncated");
  if (!t.is_array() || t.size() != expected) protocol("\"truncated\" must have one flag per item");
  for (std::size_t i = 0; i < expected; ++i) flags[i] = t[i].get<bool>();
  return flags;
}

void check_unit(std::span<const double> v, const char* what) {
  if (std::abs(l2_norm(v) - 1.0) > kNormTolerance) protocol(std::string(what) + " is not unit-norm");
}

}  // namespace

json image_item(const ImageRef& image) {
  if (image.inline_bytes()) return {{"image_b64", image.bytes_b64}};
  std::string path = image.uri;
  if (path.starts_with("file://")) path = path.substr(7);
  std::error_code ec;
  if (path.find("://") == std::string::npos && !path.starts_with("synth:") &&
      std::filesystem::is_regular_file(path, ec))
    return {{"image_b64", base64::encode(read_file(path))}};
  return {{"image_uri", image.uri}};
}

json embed_text_request(std::span<const std::string> texts) {
  json items = json::array();
  for (const auto& t : texts) items.push_back({{"text", t}});
  return {{"modality", "text"}, {"items", std::move(items)}};
}

json embed_image_request(std::span<const ImageRef> images) {
  json items = json::array();
  for (const auto& img : images) items.push_back(image_item(img));
  return {{"modality", "image"}, {"items", std::move(items)}};
}

json embed_fused_request(std::span<const FusedInput> inputs) {
  json items = json::array();
  for (const auto& in : inputs) {
    json item = image_item(in.image);
    item["text"] = in.text;
    items.push_back(std::move(item));
  }
  return {{"modality", "fused"}, {"items", std::move(items)}};
}

json score_pairs_request(const std::string& query, std::span<const std::string> passages) {
  return {{"query", query}, {"passages", std::vector<std::string>(passages.begin(), passages.end())}};
}

json generate_request(const std::string& prompt, const GenerateParams& params) {
  return {{"prompt", prompt}, {"max_tokens", params.max_tokens}};
}

std::vector<DenseVector> parse_dense_response(const json& body, std::size_t expected) {
  if (!body.is_object()) protocol("response is not an object");
  const auto dims = positive_size(body, "dims");
  if (!body.contains("vectors") || !body.at("vectors").is_array() ||
      body.at("vectors").size() != expected)
    protocol("expected " + std::to_string(expected) + " vectors");
  const auto flags = truncation_flags(body, expected);
  std::vector<DenseVector> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    DenseVector v{numbers(body.at("vectors")[i], dims, "vector"), true, flags[i]};
    check_unit(v.values, "vector");
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<TokenMatrix> parse_fused_response(const json& body, std::size_t expected) {
  if (!body.is_object()) protocol("response is not an object");
  const auto dims = positive_size(body, "dims");
  const auto rows = positive_size(body, "rows");
  if (rows != kFusedRows) protocol("fused matrices must have 32 rows, got " + std::to_string(rows));
  if (!body.contains("matrices") || !body.at("matrices").is_array() ||
      body.at("matrices").size() != expected)
    protocol("expected " + std::to_string(expected) + " matrices");
  const auto flags = truncation_flags(body, expected);
  std::vector<TokenMatrix> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    TokenMatrix m{rows, dims, numbers(body.at("matrices")[i], rows * dims, "matrix"), flags[i]};
    for (std::size_t r = 0; r < rows; ++r) check_unit(m.row(r), "matrix row");
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<double> parse_scores_response(const json& body, std::size_t expected) {
  if (!body.is_object() || !body.contains("scores")) protocol("missing \"scores\"");
  return numbers(body.at("scores"), expected, "scores");
}

std::string parse_generate_response(const json& body) {
  if (!body.is_object() || !body.contains("text") || !body.at("text").is_string())
    protocol("missing \"text\"");
  auto text = body.at("text").get<std::string>();
  if (text.empty()) protocol("empty completion");
  return text;
}

}  // namespace wire

// ---------------------------------------------------------------------------

struct HttpProvider::Impl {
  explicit Impl(ProviderEndpoint ep)
      : endpoint(std::move(ep)), in_flight(static_cast<std::ptrdiff_t>(endpoint.parallelism)) {
    const auto scheme = endpoint.base_url.find("://");
    if (scheme == std::string::npos)
      throw Error(ErrorCode::kInvalidArgument, "provider url needs a scheme: " + endpoint.base_url);
    const auto slash = endpoint.base_url.find('/', scheme + 3);
    host = endpoint.base_url.substr(0, slash);
    if (slash != std::string::npos) prefix = endpoint.base_url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  }

  json call(const std::string& method, const std::string& path, const json* body) {
    in_flight.acquire();
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{in_flight};

    std::string last_error;
    for (int attempt = 1; attempt <= std::max(1, endpoint.retry.max_attempts); ++attempt) {
      if (attempt > 1) std::this_thread::sleep_for(endpoint.retry.backoff * (attempt - 1));
      httplib::Client client(host);
      const auto secs = endpoint.timeout.count() / 1000;
      const auto usecs = (endpoint.timeout.count() % 1000) * 1000;
      client.set_connection_timeout(secs, usecs);
      client.set_read_timeout(secs, usecs);
      client.set_write_timeout(secs, usecs);
      const auto url = prefix + path;
      auto res = method == "GET" ? client.Get(url)
                                 : client.Post(url, body->dump(), "application/json");
      if (!res) {
        last_error = "transport error calling " + url + ": " + httplib::to_string(res.error());
        continue;
      }
      json parsed;
      try {
        parsed = json::parse(res->body);
      } catch (const json::exception&) {
        if (res->status >= 500) {
          last_error = "status " + std::to_string(res->status) + " from " + url;
          continue;
        }
        throw Error(ErrorCode::kProtocol, "provider protocol: non-JSON body from " + url);
      }
      if (res->status == 200) return parsed;
      std::string detail = "status " + std::to_string(res->status);
      if (parsed.contains("error") && parsed.at("error").is_object()) {
        const auto& e = parsed.at("error");
        detail += " " + e.value("code", std::string{"?"}) + ": " + e.value("message", std::string{});
      }
      if (res->status >= 500 || res->status == 429) {
        last_error = "service error from " + url + " (" + detail + ")";
        continue;
      }
      throw Error(ErrorCode::kProtocol, "service rejected " + url + " (" + detail + ")");
    }
    throw Error(ErrorCode::kTransport, last_error);
  }

  template <typename Input, typename Out, typename MakeReq, typename Parse>
  std::vector<Out> batched(std::span<const Input> inputs, MakeReq make_request, Parse parse) {
    std::vector<Out> out;
    out.reserve(inputs.size());
    std::size_t dims = 0;
    for (std::size_t begin = 0; begin < inputs.size(); begin += endpoint.max_batch) {
      const auto chunk = inputs.subspan(begin, std::min(endpoint.max_batch, inputs.size() - begin));
      const json req = make_request(chunk);
      auto part = parse(call("POST", "/v1/embed", &req), chunk.size());
      for (auto& item : part) {
        if (dims == 0) dims = item.values.size();
        if (item.values.size() != dims)
          throw Error(ErrorCode::kProtocol, "provider protocol: dims changed within one batch");
        out.push_back(std::move(item));
      }
    }
    return out;
  }

  ProviderEndpoint endpoint;
  std::string host;
  std::string prefix;
  std::counting_semaphore<1024> in_flight;
};

HttpProvider::HttpProvider(ProviderEndpoint endpoint) {
  if (endpoint.max_batch < 1) throw Error(ErrorCode::kInvalidArgument, "max_batch must be >= 1");
  if (endpoint.parallelism < 1 || endpoint.parallelism > 1024)
    throw Error(ErrorCode::kInvalidArgument, "parallelism must be in [1, 1024]");
  impl_ = std::make_unique<Impl>(std::move(endpoint));
}

HttpProvider::~HttpProvider() = default;

std::string HttpProvider::id() const { return "http:" + impl_->endpoint.base_url; }

std::vector<DenseVector> HttpProvider::embed_text(std::span<const std::string> texts) const {
  if (texts.empty()) throw Error(ErrorCode::kInvalidArgument, "embed_text: empty batch");
  for (const auto& t : texts)
    if (t.empty()) throw Error(ErrorCode::kInvalidArgument, "embed_text: empty text");
  return impl_->batched<std::string, DenseVector>(
      texts, [](auto chunk) { return wire::embed_text_request(chunk); },
      wire::parse_dense_response);
}

std::vector<DenseVector> HttpProvider::embed_image(std::span<const ImageRef> images) const {
  if (images.empty()) throw Error(ErrorCode::kInvalidArgument, "embed_image: empty batch");
  return impl_->batched<ImageRef, DenseVector>(
      images, [](auto chunk) { return wire::embed_image_request(chunk); },
      wire::parse_dense_response);
}

std::vector<TokenMatrix> HttpProvider::embed_fused(std::span<const FusedInput> inputs) const {
  if (inputs.empty()) throw Error(ErrorCode::kInvalidArgument, "embed_fused: empty batch");
  return impl_->batched<FusedInput, TokenMatrix>(
      inputs, [](auto chunk) { return wire::embed_fused_request(chunk); },
      wire::parse_fused_response);
}

std::vector<double> HttpProvider::score_text_pairs(const std::string& question,
                                                   std::span<const std::string> passages) const {
  if (passages.empty()) throw Error(ErrorCode::kInvalidArgument, "score_text_pairs: no passages");
  const json req = wire::score_pairs_request(question, passages);
  return wire::parse_scores_response(impl_->call("POST", "/v1/score_pairs", &req), passages.size());
}

std::string HttpProvider::generate(const std::string& prompt, const GenerateParams& params) const {
  if (prompt.empty()) throw Error(ErrorCode::kInvalidArgument, "generate: empty prompt");
  const json req = wire::generate_request(prompt, params);
  return wire::parse_generate_response(impl_->call("POST", "/v1/generate", &req));
}

json HttpProvider::health() const { return impl_->call("GET", "/v1/health", nullptr); }

}  // namespace omgm
