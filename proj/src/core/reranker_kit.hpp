#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/corpus.hpp"
#include "core/pipeline.hpp"
#include "core/provider.hpp"

namespace omgm {

struct ContrastivePair {
  ImageRef image;
  std::string entity_id;
  int section_index = 0;
  std::string section_text;  // not serialized; resolved from the corpus on load
};

struct ContrastivePairSet {
  std::string sample_id;
  std::vector<ContrastivePair> pairs;
  std::size_t positive_index = 0;
  std::size_t hard_negatives = 0;
  std::uint64_t seed = 0;
};

/// Candidate with the largest inner product against the query image; the
/// first one wins ties.
ImageRef select_positive_image(const ImageRef& query_image, std::span<const ImageRef> candidates,
                               const Provider& provider);

/// One positive (best-matching gold image x evidence section), up to
/// `max_hard_negatives` other sections of the gold article (longest first),
/// and the rest as (main image, first section) of stage-one candidates drawn
/// with a generator seeded from `run_seed` and the sample id.
ContrastivePairSet build_pairs(const QuerySample& sample,
                               const std::vector<StageOneResult>& stage1, const Corpus& corpus,
                               const Provider& provider, const PairConfig& config,
                               std::uint64_t run_seed);

/// -log softmax of the positive score at temperature T, log-sum-exp stable.
double contrastive_loss(std::span<const double> scores, std::size_t positive_index,
                        double temperature);

nlohmann::ordered_json pair_set_to_json(const ContrastivePairSet& set);

/// Streams pair sets to a JSONL file, one set per line, after an optional
/// header line.
class PairWriter {
 public:
  PairWriter(const std::string& path, const nlohmann::ordered_json* header = nullptr);
  void write(const ContrastivePairSet& set);
  std::size_t written() const noexcept { return written_; }
  void close();

 private:
  std::ofstream out_;
  std::string path_;
  std::size_t written_ = 0;
};

void export_pairs(std::span<const ContrastivePairSet> sets, const std::string& path,
                  const nlohmann::ordered_json* header = nullptr);

/// Reads a pairs file, skipping the header line. Section texts are filled in
/// when `corpus` is given.
std::vector<ContrastivePairSet> load_pairs(const std::string& path, const Corpus* corpus = nullptr);

}  // namespace omgm
