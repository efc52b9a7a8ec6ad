#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "core/provider.hpp"

namespace omgm {

struct SearchHit {
  std::string record_id;
  double score = 0.0;

  bool operator==(const SearchHit&) const = default;
};

struct IndexMetadata {
  std::string provider_id;
  std::int64_t build_timestamp = 0;  // seconds since epoch
  bool normalized = true;
  std::vector<std::string> truncated_ids;  // inputs the provider cut to its limit
  nlohmann::ordered_json provenance;       // engine version and run config, if recorded
};

/// Exact inner-product index over a flat array of vectors. Immutable after
/// build; searches are pure and safe to run concurrently.
class VectorIndex {
 public:
  using Entry = std::pair<std::string, DenseVector>;

  static VectorIndex build(std::vector<Entry> entries, IndexMetadata metadata = {});

  std::size_t dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const IndexMetadata& metadata() const noexcept { return metadata_; }
  const std::string& id_at(std::size_t i) const { return ids_.at(i); }
  std::span<const double> vector_at(std::size_t i) const {
    return {values_.data() + i * dims_, dims_};
  }

  /// Top-min(k, size) entries by inner product, ties by insertion order.
  std::vector<SearchHit> search(std::span<const double> query, std::size_t k) const;

 private:
  std::size_t dims_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> values_;
  IndexMetadata metadata_;
};

VectorIndex build_index(std::vector<VectorIndex::Entry> entries, IndexMetadata metadata = {});

// On disk: "OMGMIDX1", u32 dims, u64 count, then per entry u32 id length,
// id bytes and `dims` little-endian f64; followed by u32 length + JSON
// metadata. The eighth magic byte is the format version.
std::string serialize_index(const VectorIndex& index);
VectorIndex parse_index(std::string_view bytes);
void persist_index(const VectorIndex& index, const std::string& path);
VectorIndex load_index(const std::string& path);

}  // namespace omgm
