#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace omgm {

/// Image locator. Exactly one of `uri` or `bytes_b64` is populated.
struct ImageRef {
  std::string ref_id;
  std::string uri;
  std::string bytes_b64;

  bool inline_bytes() const noexcept { return !bytes_b64.empty(); }
  bool operator==(const ImageRef&) const = default;
};

struct SectionRecord {
  int index = 0;
  std::string heading;
  std::string body;

  bool operator==(const SectionRecord&) const = default;
};

struct EntityRecord {
  std::string entity_id;
  std::string title;
  std::optional<std::string> summary;
  std::vector<SectionRecord> sections;
  std::optional<ImageRef> main_image;
  std::vector<ImageRef> aux_images;

  bool operator==(const EntityRecord&) const = default;
};

enum class AnswerKind { kString, kNumeric };

struct QuerySample {
  std::string sample_id;
  ImageRef image;
  std::string question;
  std::optional<std::string> gold_entity_id;
  std::optional<int> gold_section_index;
  std::vector<std::string> valid_answers;
  AnswerKind answer_kind = AnswerKind::kString;

  bool operator==(const QuerySample&) const = default;
};

/// Numeric gold answer: a scalar has lo == hi.
struct NumericGold {
  double lo = 0.0;
  double hi = 0.0;
  bool is_range() const noexcept { return lo != hi; }
};

/// Parses "1450", "-3.5e2" or a range written "[a, b]".
std::optional<NumericGold> parse_numeric_gold(std::string_view text);

struct SegmentationPolicy {
  std::size_t max_chars = 2000;
  std::size_t max_paragraphs = 0;  // 0 = unlimited
};

struct CorpusManifest {
  std::size_t entities = 0;
  std::size_t sections = 0;
  std::size_t images = 0;
  std::size_t summaries = 0;
  std::vector<std::string> missing_main_image;
  std::vector<std::string> missing_summary;
  SegmentationPolicy policy;

  nlohmann::ordered_json to_json() const;
};

/// Splits raw article text into sections. Heading lines ("# " / "## ")
/// delimit sections; bodies longer than the policy are packed by paragraph.
/// Bodies are verbatim, in-order slices of `raw_text`.
std::vector<SectionRecord> segment_article(std::string_view raw_text,
                                           const SegmentationPolicy& policy);

/// Immutable, id-indexed set of entities. Revisions are produced by copy.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<EntityRecord> entities, SegmentationPolicy policy);

  const std::vector<EntityRecord>& entities() const noexcept { return entities_; }
  std::size_t size() const noexcept { return entities_.size(); }
  int revision() const noexcept { return revision_; }
  const SegmentationPolicy& policy() const noexcept { return policy_; }

  const EntityRecord* find(std::string_view entity_id) const;
  const EntityRecord& at(std::string_view entity_id) const;

  /// Returns the next revision with the named summaries replaced.
  Corpus with_summaries(const std::map<std::string, std::string>& summaries) const;

 private:
  std::vector<EntityRecord> entities_;
  std::unordered_map<std::string, std::size_t> by_id_;
  SegmentationPolicy policy_;
  int revision_ = 0;
};

enum class CorpusFormat { kJsonl };

Corpus load_corpus(const std::string& path, CorpusFormat format = CorpusFormat::kJsonl,
                   const SegmentationPolicy& policy = {});
Corpus parse_corpus(std::string_view jsonl, const SegmentationPolicy& policy = {});
void persist_corpus(const Corpus& corpus, const std::string& path);
std::string serialize_corpus(const Corpus& corpus);

Corpus attach_summaries(const Corpus& corpus,
                        const std::map<std::string, std::string>& summaries);
CorpusManifest validate_corpus(const Corpus& corpus);

std::vector<QuerySample> load_samples(const std::string& path);
std::vector<QuerySample> parse_samples(std::string_view jsonl);
std::string serialize_samples(const std::vector<QuerySample>& samples);

nlohmann::ordered_json image_to_json(const ImageRef& image);
ImageRef image_from_json(const nlohmann::json& j);
nlohmann::ordered_json entity_to_json(const EntityRecord& entity);
nlohmann::ordered_json sample_to_json(const QuerySample& sample);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// Calls `fn(line_number, line)` for every non-blank line (1-based numbering).
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    ++line_no;
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) fn(line_no, line);
    pos = end + 1;
  }
}

}  // namespace omgm
