#include "core/vector_index.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <unordered_set>

#include "core/error.hpp"

namespace omgm {

namespace {

constexpr std::string_view kMagicPrefix = "OMGMIDX";
constexpr char kVersion = '1';

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n)
      throw Error(ErrorCode::kCorrupt, "index file truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

VectorIndex VectorIndex::build(std::vector<Entry> entries, IndexMetadata metadata) {
  if (entries.empty()) throw Error(ErrorCode::kInvalidArgument, "build_index: no entries");
  VectorIndex index;
  index.dims_ = entries.front().second.dims();
  if (index.dims_ == 0) throw Error(ErrorCode::kDimsMismatch, "build_index: zero-dimensional vector");
  index.metadata_ = std::move(metadata);
  index.ids_.reserve(entries.size());
  index.values_.reserve(entries.size() * index.dims_);
  std::unordered_set<std::string> seen;
  for (auto& [id, vec] : entries) {
    if (vec.dims() != index.dims_)
      throw Error(ErrorCode::kDimsMismatch, "build_index: entry \"" + id + "\" has dims " +
                                                std::to_string(vec.dims()) + ", expected " +
                                                std::to_string(index.dims_));
    if (!seen.insert(id).second)
      throw Error(ErrorCode::kDuplicateId, "build_index: duplicate id \"" + id + "\"");
    index.values_.insert(index.values_.end(), vec.values.begin(), vec.values.end());
    index.ids_.push_back(std::move(id));
  }
  return index;
}

std::vector<SearchHit> VectorIndex::search(std::span<const double> query, std::size_t k) const {
  if (query.size() != dims_)
    throw Error(ErrorCode::kDimsMismatch, "search: query dims " + std::to_string(query.size()) +
                                              " != index dims " + std::to_string(dims_));
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "search: k must be >= 1");
  const std::size_t n = size();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = dot(query, vector_at(i));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t top = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  std::vector<SearchHit> hits;
  hits.reserve(top);
  for (std::size_t i = 0; i < top; ++i) hits.push_back({ids_[order[i]], scores[order[i]]});
  return hits;
}

VectorIndex build_index(std::vector<VectorIndex::Entry> entries, IndexMetadata metadata) {
  return VectorIndex::build(std::move(entries), std::move(metadata));
}

std::string serialize_index(const VectorIndex& index) {
  Writer w;
  w.bytes(kMagicPrefix);
  w.bytes(std::string_view(&kVersion, 1));
  w.u32(static_cast<std::uint32_t>(index.dims()));
  w.u64(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& id = index.id_at(i);
    w.u32(static_cast<std::uint32_t>(id.size()));
    w.bytes(id);
    for (double v : index.vector_at(i)) w.f64(v);
  }
  const auto& m = index.metadata();
  nlohmann::ordered_json meta = {{"provider_id", m.provider_id},
                                 {"build_timestamp", m.build_timestamp},
                                 {"normalized", m.normalized},
                                 {"truncated_ids", m.truncated_ids}};
  if (!m.provenance.is_null()) meta["provenance"] = m.provenance;
  const auto blob = meta.dump();
  w.u32(static_cast<std::uint32_t>(blob.size()));
  w.bytes(blob);
  return w.take();
}

VectorIndex parse_index(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < 8 || bytes.substr(0, kMagicPrefix.size()) != kMagicPrefix)
    throw Error(ErrorCode::kCorrupt, "not an index file (bad magic)");
  r.bytes(kMagicPrefix.size());
  const char version = r.bytes(1)[0];
  if (version != kVersion)
    throw Error(ErrorCode::kVersion, std::string("unsupported index format version '") + version +
                                         "', expected '" + kVersion + "'");
  const std::size_t dims = r.u32();
  const std::uint64_t count = r.u64();
  if (dims == 0) throw Error(ErrorCode::kCorrupt, "index declares zero dims");
  // Each entry needs at least 4 + 8*dims bytes; reject absurd counts early.
  if (count > r.remaining() / (4 + 8 * dims))
    throw Error(ErrorCode::kCorrupt, "index file truncated: declared " + std::to_string(count) +
                                         " entries");
  std::vector<VectorIndex::Entry> entries;
  entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = r.u32();
    std::string id(r.bytes(len));
    DenseVector v;
    v.values.resize(dims);
    for (auto& x : v.values) x = r.f64();
    entries.emplace_back(std::move(id), std::move(v));
  }
  IndexMetadata meta;
  const auto blob_len = r.u32();
  const auto blob = r.bytes(blob_len);
  if (!r.done()) throw Error(ErrorCode::kCorrupt, "trailing bytes after index metadata");
  try {
    const auto j = nlohmann::ordered_json::parse(blob);
    meta.provider_id = j.at("provider_id").get<std::string>();
    meta.build_timestamp = j.at("build_timestamp").get<std::int64_t>();
    meta.normalized = j.at("normalized").get<bool>();
    meta.truncated_ids = j.at("truncated_ids").get<std::vector<std::string>>();
    if (j.contains("provenance")) meta.provenance = j.at("provenance");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorrupt, std::string("index metadata unreadable: ") + e.what());
  }
  try {
    return VectorIndex::build(std::move(entries), std::move(meta));
  } catch (const Error& e) {
    throw Error(ErrorCode::kCorrupt, std::string("index content invalid: ") + e.what());
  }
}

void persist_index(const VectorIndex& index, const std::string& path) {
  write_file(path, serialize_index(index));
}

VectorIndex load_index(const std::string& path) { return parse_index(read_file(path)); }

}  // namespace omgm
