#include <algorithm>
#include <cstdio>
#include <random>

#include "core/error.hpp"
#include "core/eval.hpp"

namespace omgm {

namespace {

std::string padded(const char* prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04zu", prefix, n);
  return buf;
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

}  // namespace

PlantedBenchmark make_planted_benchmark(const PlantedOptions& o) {
  if (o.entities < 2) throw Error(ErrorCode::kInvalidArgument, "planted: need at least 2 entities");
  if (o.imageless >= o.entities)
    throw Error(ErrorCode::kInvalidArgument, "planted: every entity would be imageless");
  if (o.min_sections < 1 || o.max_sections < o.min_sections)
    throw Error(ErrorCode::kInvalidArgument, "planted: bad section bounds");
  if (o.noise_fraction < 0.0 || o.noise_fraction > 1.0)
    throw Error(ErrorCode::kInvalidArgument, "planted: noise_fraction must lie in [0, 1]");
  if (o.vocabulary == 0 || o.words_per_section == 0 || o.question_terms == 0 ||
      o.question_terms > o.words_per_section)
    throw Error(ErrorCode::kInvalidArgument, "planted: bad vocabulary settings");

  std::mt19937_64 rng(o.seed);
  std::vector<EntityRecord> entities;
  entities.reserve(o.entities);
  for (std::size_t e = 0; e < o.entities; ++e) {
    EntityRecord rec;
    rec.entity_id = padded("e", e);
    rec.title = "Entity " + std::to_string(e);
    const std::string image_key = "img-" + rec.entity_id;
    rec.summary = "[seed:" + image_key + "] " + rec.title + " is a planted entity.";
    if (e + o.imageless < o.entities) {
      rec.main_image = ImageRef{image_key, "synth:" + image_key, ""};
      rec.aux_images.push_back(ImageRef{image_key + "-a1", "synth:" + image_key + "-a1", ""});
    }
    const std::size_t n_sections = o.min_sections + pick(rng, o.max_sections - o.min_sections + 1);
    for (std::size_t h = 0; h < n_sections; ++h) {
      SectionRecord s;
      s.index = static_cast<int>(h);
      s.heading = "Part " + std::to_string(h);
      s.body = "[seed:sec-" + rec.entity_id + "-" + std::to_string(h) + "]";
      for (std::size_t w = 0; w < o.words_per_section; ++w)
        s.body += " w" + std::to_string(pick(rng, o.vocabulary));
      rec.sections.push_back(std::move(s));
    }
    entities.push_back(std::move(rec));
  }

  PlantedBenchmark out;
  const std::size_t with_image = o.entities - o.imageless;
  const auto noisy_count =
      static_cast<std::size_t>(o.noise_fraction * static_cast<double>(o.samples) + 0.5);
  for (std::size_t i = 0; i < o.samples; ++i) {
    const auto& gold = entities[pick(rng, with_image)];
    const std::size_t h = pick(rng, gold.sections.size());
    const std::string sample_id = padded("q", i);

    QuerySample q;
    q.sample_id = sample_id;
    std::string image_key = "img-" + gold.entity_id;
    if (i < noisy_count) {
      std::size_t d = pick(rng, with_image - 1);
      const auto gold_pos = static_cast<std::size_t>(&gold - entities.data());
      const auto& distractor = entities[d >= gold_pos ? d + 1 : d];
      char weights[96];
      std::snprintf(weights, sizeof(weights), "*%g+img-%s*%g", o.gold_weight,
                    distractor.entity_id.c_str(), o.distractor_weight);
      image_key += weights;
      out.noisy_samples.push_back(sample_id);
    }
    q.image = ImageRef{"[seed:" + image_key + "]" + sample_id, "synth:" + sample_id, ""};

    // Question terms are drawn from the evidence section's own words.
    const auto& body = gold.sections[h].body;
    std::vector<std::string> words;
    for (std::size_t pos = body.find(" w"); pos != std::string::npos; pos = body.find(" w", pos + 1)) {
      const auto end = body.find(' ', pos + 1);
      words.push_back(body.substr(pos + 1, end == std::string::npos ? end : end - pos - 1));
    }
    for (std::size_t t = 0; t < o.question_terms; ++t)
      std::swap(words[t], words[t + pick(rng, words.size() - t)]);
    q.question = "[seed:sec-" + gold.entity_id + "-" + std::to_string(h) + "]";
    for (std::size_t t = 0; t < o.question_terms; ++t) q.question += " " + words[t];
    q.gold_entity_id = gold.entity_id;
    q.gold_section_index = static_cast<int>(h);
    q.valid_answers = {gold.title};
    out.samples.push_back(std::move(q));
  }
  out.corpus = Corpus(std::move(entities), SegmentationPolicy{});
  return out;
}

}  // namespace omgm
