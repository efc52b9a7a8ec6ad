#include "core/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>
#include <thread>

namespace omgm {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

struct ScoredEntity {
  std::vector<double> sims;
  bool truncated = false;
};

// Scores every section of every entity in one fused-embedding batch.
// Imageless entities use `image_for` to pick the placeholder (or nothing).
std::vector<ScoredEntity> score_sections(const TokenMatrix& query,
                                         const std::vector<const EntityRecord*>& entities,
                                         const std::vector<const ImageRef*>& images,
                                         const Provider& provider) {
  std::vector<FusedInput> inputs;
  for (std::size_t e = 0; e < entities.size(); ++e) {
    if (!images[e]) continue;
    for (const auto& s : entities[e]->sections) inputs.push_back({*images[e], s.body});
  }
  std::vector<TokenMatrix> matrices;
  if (!inputs.empty()) matrices = provider.embed_fused(inputs);
  if (matrices.size() != inputs.size())
    throw Error(ErrorCode::kProtocol, "provider returned a wrong number of fused matrices");

  std::vector<ScoredEntity> out(entities.size());
  std::size_t next = 0;
  for (std::size_t e = 0; e < entities.size(); ++e) {
    if (!images[e]) {
      out[e].sims.assign(entities[e]->sections.size(), 0.0);
      continue;
    }
    for (std::size_t h = 0; h < entities[e]->sections.size(); ++h, ++next) {
      out[e].sims.push_back(maxsim(query, matrices[next]));
      out[e].truncated = out[e].truncated || matrices[next].truncated;
    }
  }
  return out;
}

const ImageRef* candidate_image(const EntityRecord& entity, ImagelessPolicy policy) {
  if (entity.main_image) return &*entity.main_image;
  return policy == ImagelessPolicy::kPlaceholder ? &placeholder_image() : nullptr;
}

StageTwoResult make_stage_two(const EntityRecord& entity, double sim_c, ScoredEntity scored,
                              ImagelessPolicy policy) {
  StageTwoResult r;
  r.entity_id = entity.entity_id;
  r.sim_c = sim_c;
  r.section_sims = std::move(scored.sims);
  r.truncated = scored.truncated;
  r.sim_m_max = *std::max_element(r.section_sims.begin(), r.section_sims.end());
  if (!entity.main_image) {
    r.placeholder_image = policy == ImagelessPolicy::kPlaceholder;
    r.demoted = policy == ImagelessPolicy::kDemote;
  }
  return r;
}

}  // namespace

double maxsim(const TokenMatrix& query, const TokenMatrix& candidate) {
  if (query.dims != candidate.dims)
    throw Error(ErrorCode::kDimsMismatch, "maxsim: query dims " + std::to_string(query.dims) +
                                              " != candidate dims " + std::to_string(candidate.dims));
  if (candidate.rows == 0) throw Error(ErrorCode::kInvalidArgument, "maxsim: empty candidate");
  double total = 0.0;
  for (std::size_t i = 0; i < query.rows; ++i) {
    const auto q = query.row(i);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < candidate.rows; ++j) best = std::max(best, dot(q, candidate.row(j)));
    total += best;
  }
  return total;
}

std::vector<double> normalize_scores(std::span<const double> values, ScoreNorm mode,
                                     std::size_t query_rows) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "normalize_scores: no values");
  std::vector<double> out(values.begin(), values.end());
  switch (mode) {
    case ScoreNorm::kMinMax: {
      const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
      const double min = *lo;
      const double range = *hi - *lo;
      for (auto& v : out) v = range > 0.0 ? (v - min) / range : 0.5;
      break;
    }
    case ScoreNorm::kByQueryLen:
      if (query_rows == 0) throw Error(ErrorCode::kInvalidArgument, "normalize_scores: zero rows");
      for (auto& v : out) v /= static_cast<double>(query_rows);
      break;
    case ScoreNorm::kNone:
      break;
  }
  return out;
}

std::vector<double> normalize_bounded(std::span<const double> values, ScoreNorm mode) {
  return normalize_scores(values, mode == ScoreNorm::kMinMax ? ScoreNorm::kMinMax : ScoreNorm::kNone);
}

std::vector<double> fuse_weighted(std::span<const double> primary,
                                  std::span<const double> secondary, double weight) {
  if (primary.size() != secondary.size())
    throw Error(ErrorCode::kInvalidArgument, "fuse_weighted: length mismatch");
  std::vector<double> out(primary.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = weight * primary[i] + (1.0 - weight) * secondary[i];
  return out;
}

std::vector<StageTwoResult> fuse_and_rank(std::vector<StageTwoResult> candidates, double alpha,
                                          ScoreNorm mode) {
  if (candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "fuse_and_rank: no candidates");
  std::vector<StageTwoResult> active;
  std::vector<StageTwoResult> demoted;
  for (auto& c : candidates) (c.demoted ? demoted : active).push_back(std::move(c));

  if (!active.empty()) {
    std::vector<double> sim_c;
    std::vector<double> sim_m;
    for (const auto& c : active) {
      sim_c.push_back(c.sim_c);
      sim_m.push_back(c.sim_m_max);
    }
    const auto fused =
        fuse_weighted(normalize_bounded(sim_c, mode), normalize_scores(sim_m, mode), alpha);
    for (std::size_t i = 0; i < active.size(); ++i) active[i].fused = fused[i];
    std::sort(active.begin(), active.end(), [](const StageTwoResult& a, const StageTwoResult& b) {
      if (a.fused != b.fused) return a.fused > b.fused;
      return a.entity_id < b.entity_id;
    });
  }
  std::sort(demoted.begin(), demoted.end(), [](const StageTwoResult& a, const StageTwoResult& b) {
    if (a.sim_c != b.sim_c) return a.sim_c > b.sim_c;
    return a.entity_id < b.entity_id;
  });
  for (auto& d : demoted) {
    d.fused = 0.0;
    active.push_back(std::move(d));
  }
  return active;
}

SectionChoice choose_section(std::span<const double> sim_m, std::span<const double> sim_t,
                             double beta, ScoreNorm mode) {
  if (sim_m.empty() || sim_m.size() != sim_t.size())
    throw Error(ErrorCode::kInvalidArgument, "choose_section: need one sim_m and sim_t per section");
  SectionChoice choice;
  choice.fused = fuse_weighted(normalize_scores(sim_m, mode), normalize_bounded(sim_t, mode), beta);
  for (std::size_t h = 1; h < choice.fused.size(); ++h)
    if (choice.fused[h] > choice.fused[choice.index]) choice.index = h;
  return choice;
}

void check_same_provider(const VectorIndex& index, const Provider& provider) {
  const auto& built_with = index.metadata().provider_id;
  if (!built_with.empty() && built_with != provider.id())
    throw Error(ErrorCode::kConsistency, "index was built with provider \"" + built_with +
                                             "\" but the pipeline uses \"" + provider.id() + "\"");
}

std::vector<StageOneResult> stage1_search(const ImageRef& query_image, const Corpus& corpus,
                                          const VectorIndex& index, const Provider& provider,
                                          std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "stage1_search: k must be >= 1");
  const ImageRef one[] = {query_image};
  auto query = std::move(provider.embed_image(one).at(0));
  if (index.metadata().normalized) l2_normalize(query.values);
  const auto hits = index.search(query.values, k);
  std::vector<StageOneResult> out;
  out.reserve(hits.size());
  for (const auto& h : hits) {
    if (!corpus.find(h.record_id))
      throw Error(ErrorCode::kConsistency,
                  "index entry \"" + h.record_id + "\" is not in the corpus");
    out.push_back({h.record_id, h.score});
  }
  return out;
}

StageTwoResult entity_multimodal_score(const TokenMatrix& query_matrix,
                                       const EntityRecord& entity, const Provider& provider,
                                       ImagelessPolicy policy) {
  if (entity.sections.empty())
    throw Error(ErrorCode::kInvalidArgument, "entity " + entity.entity_id + " has no sections");
  auto scored = score_sections(query_matrix, {&entity}, {candidate_image(entity, policy)}, provider);
  return make_stage_two(entity, 0.0, std::move(scored.front()), policy);
}

StageTwoResult entity_multimodal_score(const QueryInput& query, const EntityRecord& entity,
                                       const Provider& provider, ImagelessPolicy policy) {
  return entity_multimodal_score(provider.embed_fused(query.image, query.question), entity,
                                 provider, policy);
}

std::vector<StageTwoResult> rerank_entities(const std::vector<StageOneResult>& stage1,
                                            const QueryInput& query, const Corpus& corpus,
                                            const Provider& provider, const PipelineConfig& config) {
  if (stage1.empty()) throw Error(ErrorCode::kInvalidArgument, "rerank_entities: no candidates");
  std::vector<const EntityRecord*> entities;
  std::vector<const ImageRef*> images;
  for (const auto& s : stage1) {
    const auto& e = corpus.at(s.entity_id);
    if (e.sections.empty())
      throw Error(ErrorCode::kInvalidArgument, "entity " + e.entity_id + " has no sections");
    entities.push_back(&e);
    images.push_back(candidate_image(e, config.imageless));
  }
  const auto query_matrix = provider.embed_fused(query.image, query.question);
  auto scored = score_sections(query_matrix, entities, images, provider);

  std::vector<StageTwoResult> candidates;
  candidates.reserve(stage1.size());
  for (std::size_t i = 0; i < stage1.size(); ++i)
    candidates.push_back(
        make_stage_two(*entities[i], stage1[i].sim_c, std::move(scored[i]), config.imageless));
  auto ranked = fuse_and_rank(std::move(candidates), config.alpha, config.score_norm);
  if (query_matrix.truncated)
    for (auto& r : ranked) r.truncated = true;
  return ranked;
}

FinalContext select_section(const StageTwoResult& top1, const std::string& question,
                            const Corpus& corpus, const Provider& provider,
                            const PipelineConfig& config) {
  const auto& entity = corpus.at(top1.entity_id);
  if (entity.sections.empty())
    throw Error(ErrorCode::kInvalidArgument, "entity " + entity.entity_id + " has no sections");
  if (top1.section_sims.size() != entity.sections.size())
    throw Error(ErrorCode::kConsistency, "stage-two section scores do not match entity " +
                                             entity.entity_id);
  std::vector<std::string> passages;
  passages.reserve(entity.sections.size());
  for (const auto& s : entity.sections) passages.push_back(s.body);
  const auto sim_t = provider.score_text_pairs(question, passages);
  if (sim_t.size() != passages.size())
    throw Error(ErrorCode::kProtocol, "text scorer returned a wrong number of scores");
  const auto choice = choose_section(top1.section_sims, sim_t, config.beta, config.score_norm);
  FinalContext ctx;
  ctx.entity_id = entity.entity_id;
  ctx.entity_title = entity.title;
  ctx.section = entity.sections[choice.index];
  ctx.sim_m = top1.section_sims[choice.index];
  ctx.sim_t = sim_t[choice.index];
  ctx.fused_section = choice.fused[choice.index];
  return ctx;
}

PipelineResult run_pipeline(const QuerySample& sample, const Corpus& corpus,
                            const VectorIndex& index, const Provider& provider,
                            const PipelineConfig& config, const RunOptions& options) {
  config.validate();
  PipelineResult result;
  result.sample_id = sample.sample_id;
  const QueryInput query{sample.image, sample.question};

  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(name, e);
    } catch (const std::exception& e) {
      throw StageError(name, Error(ErrorCode::kInternal, e.what()));
    }
  };

  auto t = Clock::now();
  result.stage1 = stage("stage1", [&] {
    check_same_provider(index, provider);
    return stage1_search(sample.image, corpus, index, provider, config.k);
  });
  result.timings.stage1_ms = elapsed_ms(t);

  t = Clock::now();
  result.stage2 =
      stage("stage2", [&] { return rerank_entities(result.stage1, query, corpus, provider, config); });
  result.timings.stage2_ms = elapsed_ms(t);

  t = Clock::now();
  result.context = stage("stage3", [&] {
    return select_section(result.stage2.front(), sample.question, corpus, provider, config);
  });
  result.timings.stage3_ms = elapsed_ms(t);

  if (options.with_generation) {
    t = Clock::now();
    result.answer = stage("generate", [&] {
      return provider.generate(assemble_prompt(result.context, sample.question, options.style),
                               options.generate);
    });
    result.timings.generate_ms = elapsed_ms(t);
  }

  for (const auto& c : result.stage2) {
    if (c.placeholder_image) result.placeholder_entities.push_back(c.entity_id);
    result.truncated = result.truncated || c.truncated;
  }
  return result;
}

std::vector<SampleOutcome> run_batch(std::span<const QuerySample> samples, const Corpus& corpus,
                                     const VectorIndex& index, const Provider& provider,
                                     const PipelineConfig& config, const RunOptions& options) {
  config.validate();
  std::vector<SampleOutcome> out(samples.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      auto& o = out[i];
      o.sample_id = samples[i].sample_id;
      try {
        o.result = run_pipeline(samples[i], corpus, index, provider, config, options);
      } catch (const StageError& e) {
        o.error_stage = e.stage();
        o.error = e;
      } catch (const Error& e) {
        o.error_stage = "setup";
        o.error = e;
      }
    }
  };
  const std::size_t threads = std::min(config.parallelism, samples.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return out;
}

nlohmann::ordered_json result_to_json(const SampleOutcome& outcome, bool with_timings) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["sample_id"] = outcome.sample_id;
  if (!outcome.result) {
    j["error"] = {{"stage", outcome.error_stage.value_or("unknown")},
                  {"code", outcome.error ? error_code_name(outcome.error->code()) : "internal"},
                  {"message", outcome.error ? outcome.error->what() : ""}};
    return j;
  }
  const auto& r = *outcome.result;
  auto stage1 = ordered_json::array();
  for (const auto& s : r.stage1) stage1.push_back({{"entity_id", s.entity_id}, {"sim_c", s.sim_c}});
  j["stage1"] = std::move(stage1);
  auto stage2 = ordered_json::array();
  for (const auto& s : r.stage2)
    stage2.push_back({{"entity_id", s.entity_id}, {"fused", s.fused}, {"sim_m_max", s.sim_m_max}});
  j["stage2"] = std::move(stage2);
  const auto& top = r.stage2.front();
  j["top1_entity"] = r.context.entity_id;
  j["best_section_index"] = r.context.section.index;
  j["scores"] = {{"sim_c", top.sim_c},
                 {"sim_m", r.context.sim_m},
                 {"sim_t", r.context.sim_t},
                 {"fused_entity", top.fused},
                 {"fused_section", r.context.fused_section}};
  auto ms = [&](std::optional<double> v) {
    return with_timings && v ? ordered_json(*v) : ordered_json(nullptr);
  };
  j["timings_ms"] = {{"stage1", ms(r.timings.stage1_ms)},
                     {"stage2", ms(r.timings.stage2_ms)},
                     {"stage3", ms(r.timings.stage3_ms)},
                     {"generate", ms(r.timings.generate_ms)}};
  j["answer"] = r.answer ? ordered_json(*r.answer) : ordered_json(nullptr);
  j["flags"] = {{"placeholder_entities", r.placeholder_entities}, {"truncated", r.truncated}};
  return j;
}

VectorIndex index_corpus(const Corpus& corpus, const Provider& provider, bool normalize,
                         std::int64_t build_timestamp) {
  std::vector<std::string> texts;
  std::vector<std::string> missing;
  for (const auto& e : corpus.entities()) {
    if (!e.summary || e.summary->empty())
      missing.push_back(e.entity_id);
    else
      texts.push_back(*e.summary);
  }
  if (!missing.empty()) {
    std::string msg = "index_corpus: " + std::to_string(missing.size()) +
                      " entities lack summaries (first: " + missing.front() + ")";
    throw Error(ErrorCode::kInvalidArgument, msg);
  }
  if (texts.empty()) throw Error(ErrorCode::kInvalidArgument, "index_corpus: empty corpus");
  auto vectors = provider.embed_text(texts);
  if (vectors.size() != texts.size())
    throw Error(ErrorCode::kProtocol, "provider returned a wrong number of vectors");
  IndexMetadata meta;
  meta.provider_id = provider.id();
  meta.build_timestamp = build_timestamp;
  meta.normalized = normalize;
  std::vector<VectorIndex::Entry> entries;
  entries.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& id = corpus.entities()[i].entity_id;
    if (vectors[i].truncated) meta.truncated_ids.push_back(id);
    if (normalize) l2_normalize(vectors[i].values);
    entries.emplace_back(id, std::move(vectors[i]));
  }
  return VectorIndex::build(std::move(entries), std::move(meta));
}

}  // namespace omgm
