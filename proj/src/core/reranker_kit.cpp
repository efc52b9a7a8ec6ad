#include "core/reranker_kit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_set>

#include "core/error.hpp"

namespace omgm {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Unbiased integer in [0, n) by rejection; independent of the standard
// library's distribution implementations.
std::size_t uniform_below(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return static_cast<std::size_t>(x % bound);
}

}  // namespace

ImageRef select_positive_image(const ImageRef& query_image, std::span<const ImageRef> candidates,
                               const Provider& provider) {
  if (candidates.empty())
    throw Error(ErrorCode::kInvalidArgument, "select_positive_image: no candidates");
  std::vector<ImageRef> batch;
  batch.reserve(candidates.size() + 1);
  batch.push_back(query_image);
  batch.insert(batch.end(), candidates.begin(), candidates.end());
  const auto vecs = provider.embed_image(batch);
  std::size_t best = 0;
  double best_score = dot(vecs[0].values, vecs[1].values);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double s = dot(vecs[0].values, vecs[i + 1].values);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return candidates[best];
}

ContrastivePairSet build_pairs(const QuerySample& sample,
                               const std::vector<StageOneResult>& stage1, const Corpus& corpus,
                               const Provider& provider, const PairConfig& config,
                               std::uint64_t run_seed) {
  if (!sample.gold_entity_id || !sample.gold_section_index)
    throw Error(ErrorCode::kInvalidArgument,
                "build_pairs: sample " + sample.sample_id + " lacks a gold entity or section");
  if (config.pairs_per_sample < 2)
    throw Error(ErrorCode::kInvalidArgument, "build_pairs: need at least 2 pairs per sample");
  const auto& gold = corpus.at(*sample.gold_entity_id);
  const int evidence = *sample.gold_section_index;
  if (evidence < 0 || static_cast<std::size_t>(evidence) >= gold.sections.size())
    throw Error(ErrorCode::kNotFound, "build_pairs: sample " + sample.sample_id +
                                          ": gold section " + std::to_string(evidence) +
                                          " missing from entity " + gold.entity_id);

  ContrastivePairSet set;
  set.sample_id = sample.sample_id;
  set.seed = run_seed;

  std::vector<ImageRef> gold_images;
  if (gold.main_image) gold_images.push_back(*gold.main_image);
  gold_images.insert(gold_images.end(), gold.aux_images.begin(), gold.aux_images.end());
  const ImageRef positive_image =
      gold_images.empty() ? placeholder_image()
                          : select_positive_image(sample.image, gold_images, provider);
  set.pairs.push_back({positive_image, gold.entity_id, evidence, gold.sections[evidence].body});
  set.positive_index = 0;

  const ImageRef& gold_main = gold.main_image ? *gold.main_image : placeholder_image();
  std::vector<std::size_t> others;
  for (std::size_t h = 0; h < gold.sections.size(); ++h)
    if (static_cast<int>(h) != evidence) others.push_back(h);
  std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
    return gold.sections[a].body.size() > gold.sections[b].body.size();
  });
  const std::size_t hard =
      std::min({config.max_hard_negatives, others.size(), config.pairs_per_sample - 1});
  for (std::size_t i = 0; i < hard; ++i) {
    const auto& s = gold.sections[others[i]];
    set.pairs.push_back({gold_main, gold.entity_id, s.index, s.body});
  }
  set.hard_negatives = hard;

  std::vector<const EntityRecord*> pool;
  std::unordered_set<std::string> seen{gold.entity_id};
  for (const auto& c : stage1) {
    if (!seen.insert(c.entity_id).second) continue;
    const auto& e = corpus.at(c.entity_id);
    if (!e.sections.empty()) pool.push_back(&e);
  }
  const std::size_t needed = config.pairs_per_sample - 1 - hard;
  if (pool.size() < needed)
    throw Error(ErrorCode::kInvalidArgument,
                "build_pairs: sample " + sample.sample_id + " needs " + std::to_string(needed) +
                    " candidate negatives but only " + std::to_string(pool.size()) +
                    " distinct non-gold candidates exist (shortfall " +
                    std::to_string(needed - pool.size()) + ")");

  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : sample.sample_id) h = (h ^ c) * 0x100000001b3ULL;
  std::mt19937_64 rng(mix(run_seed ^ mix(h)));
  for (std::size_t i = 0; i < needed; ++i) {
    const std::size_t j = i + uniform_below(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
    const auto& e = *pool[i];
    set.pairs.push_back({e.main_image ? *e.main_image : placeholder_image(), e.entity_id,
                         e.sections.front().index, e.sections.front().body});
  }
  return set;
}

double contrastive_loss(std::span<const double> scores, std::size_t positive_index,
                        double temperature) {
  if (scores.size() < 2) throw Error(ErrorCode::kInvalidArgument, "contrastive_loss: need N >= 2");
  if (!(temperature > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "contrastive_loss: temperature must be positive");
  if (positive_index >= scores.size())
    throw Error(ErrorCode::kInvalidArgument, "contrastive_loss: positive index out of range");
  for (double s : scores)
    if (!std::isfinite(s)) throw Error(ErrorCode::kInvalidArgument, "contrastive_loss: non-finite score");

  // loss = log sum_j exp((s_j - s_+) / T); the positive term is exp(0).
  // Negatives are summed in sorted order so any permutation gives the same bits.
  const double pos = scores[positive_index];
  std::vector<double> logits;
  logits.reserve(scores.size() - 1);
  for (std::size_t j = 0; j < scores.size(); ++j)
    if (j != positive_index) logits.push_back((scores[j] - pos) / temperature);
  std::sort(logits.begin(), logits.end());
  const double max_logit = std::max(0.0, logits.back());
  if (max_logit == 0.0) {
    double rest = 0.0;
    for (double l : logits) rest += std::exp(l);
    return std::log1p(rest);
  }
  double sum = std::exp(-max_logit);
  for (double l : logits) sum += std::exp(l - max_logit);
  return max_logit + std::log(sum);
}

nlohmann::ordered_json pair_set_to_json(const ContrastivePairSet& set) {
  nlohmann::ordered_json j;
  j["sample_id"] = set.sample_id;
  j["positive_index"] = set.positive_index;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& p : set.pairs) {
    nlohmann::ordered_json pj;
    pj["entity_id"] = p.entity_id;
    pj["section_index"] = p.section_index;
    pj["image_ref"] = image_to_json(p.image);
    pairs.push_back(std::move(pj));
  }
  j["pairs"] = std::move(pairs);
  j["seed"] = set.seed;
  j["hard_negatives"] = set.hard_negatives;
  return j;
}

PairWriter::PairWriter(const std::string& path, const nlohmann::ordered_json* header)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) throw Error(ErrorCode::kIo, "cannot open \"" + path + "\" for writing");
  if (header) out_ << header->dump() << '\n';
}

void PairWriter::write(const ContrastivePairSet& set) {
  out_ << pair_set_to_json(set).dump() << '\n';
  if (!out_) throw Error(ErrorCode::kIo, "write to \"" + path_ + "\" failed");
  ++written_;
}

void PairWriter::close() {
  out_.close();
  if (out_.fail()) throw Error(ErrorCode::kIo, "closing \"" + path_ + "\" failed");
}

void export_pairs(std::span<const ContrastivePairSet> sets, const std::string& path,
                  const nlohmann::ordered_json* header) {
  if (sets.empty()) throw Error(ErrorCode::kInvalidArgument, "export_pairs: no pair sets");
  PairWriter writer(path, header);
  for (const auto& s : sets) writer.write(s);
  writer.close();
}

std::vector<ContrastivePairSet> load_pairs(const std::string& path, const Corpus* corpus) {
  std::vector<ContrastivePairSet> out;
  for_each_line(read_file(path), [&](std::size_t line_no, std::string_view line) {
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("omgm_header")) return;
      ContrastivePairSet s;
      s.sample_id = j.at("sample_id").get<std::string>();
      s.positive_index = j.at("positive_index").get<std::size_t>();
      s.seed = j.at("seed").get<std::uint64_t>();
      s.hard_negatives = j.value("hard_negatives", std::size_t{0});
      for (const auto& pj : j.at("pairs")) {
        ContrastivePair p;
        p.entity_id = pj.at("entity_id").get<std::string>();
        p.section_index = pj.at("section_index").get<int>();
        p.image = image_from_json(pj.at("image_ref"));
        if (corpus) {
          const auto& e = corpus->at(p.entity_id);
          if (p.section_index < 0 || static_cast<std::size_t>(p.section_index) >= e.sections.size())
            throw Error(ErrorCode::kConsistency, "section index out of range for " + p.entity_id);
          p.section_text = e.sections[p.section_index].body;
        }
        s.pairs.push_back(std::move(p));
      }
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "pairs line " + std::to_string(line_no) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace omgm
