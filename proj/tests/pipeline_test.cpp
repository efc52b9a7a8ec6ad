#include "core/pipeline.hpp"

#include <algorithm>
#include <random>

#include "core/eval.hpp"
#include "support.hpp"

namespace omgm {
namespace {

TokenMatrix matrix(std::size_t rows, std::size_t dims, std::vector<double> values) {
  return TokenMatrix{rows, dims, std::move(values), false};
}

TokenMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t dims) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TokenMatrix m{rows, dims, std::vector<double>(rows * dims), false};
  for (auto& v : m.values) v = u(rng);
  return m;
}

StageTwoResult candidate(std::string id, double sim_c, double sim_m) {
  StageTwoResult r;
  r.entity_id = std::move(id);
  r.sim_c = sim_c;
  r.sim_m_max = sim_m;
  r.section_sims = {sim_m};
  return r;
}

std::vector<std::string> ids_of(const std::vector<StageTwoResult>& ranked) {
  std::vector<std::string> out;
  for (const auto& r : ranked) out.push_back(r.entity_id);
  return out;
}

TEST(MaxSim, HandComputedExamples) {
  EXPECT_DOUBLE_EQ(maxsim(matrix(1, 2, {1, 0}), matrix(2, 2, {1, 0, 0, 1})), 1.0);
  EXPECT_DOUBLE_EQ(maxsim(matrix(2, 2, {1, 0, 0, 1}), matrix(1, 2, {0.5, 0.5})), 1.0);
  EXPECT_DOUBLE_EQ(maxsim(matrix(2, 3, {1, 0, 0, 0, 1, 0}), matrix(2, 3, {0, 0, 1, 0, 0, -1})), 0.0);
  EXPECT_OMGM_ERROR(maxsim(matrix(1, 2, {1, 0}), matrix(1, 3, {1, 0, 0})), ErrorCode::kDimsMismatch);
}

TEST(MaxSim, ByQueryLenBoundOnUnitRows) {
  const DeterministicProvider p;
  std::vector<double> scores;
  for (int i = 0; i < 20; ++i) {
    const auto q = p.embed_fused(ImageRef{"q" + std::to_string(i), "synth:q", ""}, "question");
    const auto c = p.embed_fused(ImageRef{"c" + std::to_string(i), "synth:c", ""}, "section");
    scores.push_back(maxsim(q, c));
    scores.push_back(maxsim(q, q));
  }
  for (double v : normalize_scores(scores, ScoreNorm::kByQueryLen)) EXPECT_LE(v, 1.0 + 1e-12);
}

TEST(Normalize, Modes) {
  const std::vector<double> a{2, 4, 6};
  EXPECT_EQ(normalize_scores(a, ScoreNorm::kMinMax), (std::vector<double>{0, 0.5, 1}));
  const std::vector<double> flat{5, 5, 5};
  EXPECT_EQ(normalize_scores(flat, ScoreNorm::kMinMax), (std::vector<double>{0.5, 0.5, 0.5}));
  const std::vector<double> b{32, 16};
  EXPECT_EQ(normalize_scores(b, ScoreNorm::kByQueryLen), (std::vector<double>{1, 0.5}));
  EXPECT_EQ(normalize_scores(a, ScoreNorm::kNone), a);
  EXPECT_EQ(normalize_bounded(a, ScoreNorm::kByQueryLen), a);
  EXPECT_OMGM_ERROR(normalize_scores({}, ScoreNorm::kMinMax), ErrorCode::kInvalidArgument);
}

TEST(Fusion, AlphaExtremesReproduceSingleSignalOrder) {
  std::vector<StageTwoResult> c{candidate("e1", 0.9, 10), candidate("e2", 0.8, 30), candidate("e3", 0.1, 20)};
  EXPECT_EQ(ids_of(fuse_and_rank(c, 1.0, ScoreNorm::kMinMax)), (std::vector<std::string>{"e1", "e2", "e3"}));
  EXPECT_EQ(ids_of(fuse_and_rank(c, 0.0, ScoreNorm::kMinMax)), (std::vector<std::string>{"e2", "e3", "e1"}));
}

TEST(Fusion, StrongSectionEvidencePromotesSecondPlace) {
  // sim_c ranks gold second; sim_m ranks it first by a wide margin.
  std::vector<StageTwoResult> c{candidate("d", 0.72, 8.0), candidate("gold", 0.70, 22.0),
                                candidate("x", 0.15, 8.5), candidate("y", 0.10, 7.9)};
  const auto ranked = fuse_and_rank(c, 0.9, ScoreNorm::kMinMax);
  EXPECT_EQ(ranked.front().entity_id, "gold");
  // Direct evaluation: minmax over sim_c [0.10, 0.72] and sim_m [7.9, 22].
  const double gold = 0.9 * (0.70 - 0.10) / 0.62 + 0.1 * 1.0;
  const double d = 0.9 * 1.0 + 0.1 * (8.0 - 7.9) / 14.1;
  EXPECT_NEAR(ranked[0].fused, gold, 1e-12);
  EXPECT_NEAR(ranked[1].fused, d, 1e-12);
}

TEST(Fusion, TiesBreakByEntityId) {
  std::vector<StageTwoResult> c{candidate("b", 0.5, 1), candidate("a", 0.5, 1)};
  EXPECT_EQ(ids_of(fuse_and_rank(c, 0.9, ScoreNorm::kMinMax)), (std::vector<std::string>{"a", "b"}));
}

TEST(Fusion, DemotedCandidatesGoLast) {
  auto img = candidate("img", 0.1, 1);
  auto none = candidate("none", 0.99, 100);
  none.demoted = true;
  const auto ranked = fuse_and_rank({none, img}, 0.9, ScoreNorm::kMinMax);
  EXPECT_EQ(ids_of(ranked), (std::vector<std::string>{"img", "none"}));
  EXPECT_EQ(ranked.back().fused, 0.0);
}

TEST(Fusion, RaisingSimMNeverLowersRank) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 19;
    std::vector<StageTwoResult> c;
    for (std::size_t i = 0; i < n; ++i) c.push_back(candidate("e" + std::to_string(100 + i), u(rng), 32 * u(rng)));
    const std::size_t target = rng() % n;
    auto rank_of = [&](const std::vector<StageTwoResult>& cs) {
      const auto ids = ids_of(fuse_and_rank(cs, 0.9, ScoreNorm::kMinMax));
      return std::find(ids.begin(), ids.end(), cs[target].entity_id) - ids.begin();
    };
    const auto before = rank_of(c);
    c[target].sim_m_max += 5 * u(rng);
    EXPECT_LE(rank_of(c), before);
  }
}

TEST(Fusion, ScalingSimCKeepsTheRanking) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<StageTwoResult> c;
    for (int i = 0; i < 15; ++i) c.push_back(candidate("e" + std::to_string(i), u(rng), 32 * u(rng)));
    auto scaled = c;
    const double factor = 0.25 + 4 * u(rng);
    for (auto& s : scaled) s.sim_c *= factor;
    EXPECT_EQ(ids_of(fuse_and_rank(c, 0.9, ScoreNorm::kMinMax)),
              ids_of(fuse_and_rank(scaled, 0.9, ScoreNorm::kMinMax)));
  }
}

TEST(SectionChoice, BetaExtremesAndHandTable) {
  const std::vector<double> sim_m{20, 28, 25, 10};
  const std::vector<double> sim_t{0.9, 0.1, 0.5, 0.95};
  EXPECT_EQ(choose_section(sim_m, sim_t, 1.0, ScoreNorm::kMinMax).index, 1u);
  EXPECT_EQ(choose_section(sim_m, sim_t, 0.0, ScoreNorm::kMinMax).index, 3u);
  // beta 0.2: norm sim_m = [10/18, 1, 15/18, 0], norm sim_t = [0.8/0.85, 0, 0.4/0.85, 1]
  const double f0 = 0.2 * 10 / 18 + 0.8 * 0.8 / 0.85;
  const double f3 = 0.8;
  const auto c = choose_section(sim_m, sim_t, 0.2, ScoreNorm::kMinMax);
  EXPECT_EQ(c.index, 0u);
  EXPECT_NEAR(c.fused[0], f0, 1e-12);
  EXPECT_NEAR(c.fused[3], f3, 1e-12);
  const std::vector<double> tie_m{1, 1};
  const std::vector<double> tie_t{0.5, 0.5};
  EXPECT_EQ(choose_section(tie_m, tie_t, 0.2, ScoreNorm::kMinMax).index, 0u);
}

// --- stages over a planted corpus ------------------------------------------

struct Planted {
  PlantedBenchmark bench;
  DeterministicProvider provider;
  VectorIndex index;

  explicit Planted(PlantedOptions o)
      : bench(make_planted_benchmark(o)), index(index_corpus(bench.corpus, provider, true, 0)) {}
};

PlantedOptions small(double noise = 0.0) {
  PlantedOptions o;
  o.entities = 60;
  o.samples = 30;
  o.noise_fraction = noise;
  return o;
}

TEST(Stages, PlantedQueryFindsGoldEntityAndSection) {
  Planted w(small());
  PipelineConfig cfg;
  for (const auto& s : w.bench.samples) {
    const auto r = run_pipeline(s, w.bench.corpus, w.index, w.provider, cfg);
    EXPECT_EQ(r.stage1.front().entity_id, *s.gold_entity_id);
    EXPECT_NEAR(r.stage1.front().sim_c, 1.0, 1e-12);
    EXPECT_EQ(r.stage1.size(), 20u);
    EXPECT_EQ(r.context.entity_id, *s.gold_entity_id);
    EXPECT_EQ(r.context.section.index, *s.gold_section_index);
    EXPECT_FALSE(r.answer.has_value());
  }
}

TEST(Stages, StageOneMatchesFullScanRecall) {
  Planted w(small(0.5));
  const auto k = 20u;
  std::size_t hits = 0, oracle_hits = 0;
  for (const auto& s : w.bench.samples) {
    const auto r = stage1_search(s.image, w.bench.corpus, w.index, w.provider, k);
    hits += std::any_of(r.begin(), r.end(), [&](auto& x) { return x.entity_id == *s.gold_entity_id; });
    const auto q = w.provider.embed_image(std::span(&s.image, 1))[0].values;
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < w.index.size(); ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < q.size(); ++j) d += q[j] * w.index.vector_at(i)[j];
      scored.push_back({-d, i});
    }
    std::sort(scored.begin(), scored.end());
    for (std::size_t i = 0; i < k; ++i) oracle_hits += w.index.id_at(scored[i].second) == *s.gold_entity_id;
  }
  EXPECT_EQ(hits, oracle_hits);
}

TEST(Stages, PlantedBestSectionWins) {
  Planted w(small());
  const auto& s = w.bench.samples.front();
  const auto& entity = w.bench.corpus.at(*s.gold_entity_id);
  const auto scored = entity_multimodal_score(QueryInput{s.image, s.question}, entity, w.provider,
                                              ImagelessPolicy::kPlaceholder);
  const auto best = std::max_element(scored.section_sims.begin(), scored.section_sims.end());
  EXPECT_EQ(best - scored.section_sims.begin(), *s.gold_section_index);
  EXPECT_NEAR(*best, 32.0, 1e-9);
  EXPECT_EQ(scored.sim_m_max, *best);
}

TEST(Stages, KEqualsOneHandsStageTwoASingleCandidate) {
  Planted w(small());
  PipelineConfig cfg;
  cfg.k = 1;
  const auto r = run_pipeline(w.bench.samples[0], w.bench.corpus, w.index, w.provider, cfg);
  ASSERT_EQ(r.stage2.size(), 1u);
  EXPECT_EQ(r.stage2[0].entity_id, r.stage1[0].entity_id);
}

TEST(Stages, ImagelessPolicies) {
  PlantedOptions o = small();
  o.imageless = 5;
  Planted w(o);
  const auto& e = w.bench.corpus.entities().back();
  ASSERT_FALSE(e.main_image);
  const QueryInput q{w.bench.samples[0].image, w.bench.samples[0].question};
  const auto placeholder = entity_multimodal_score(q, e, w.provider, ImagelessPolicy::kPlaceholder);
  EXPECT_TRUE(placeholder.placeholder_image);
  EXPECT_FALSE(placeholder.demoted);
  const auto demoted = entity_multimodal_score(q, e, w.provider, ImagelessPolicy::kDemote);
  EXPECT_TRUE(demoted.demoted);

  // Route the query image at an imageless entity so it reaches stage two.
  QuerySample s = w.bench.samples[0];
  s.image.ref_id = "[seed:img-" + e.entity_id + "]probe";
  PipelineConfig cfg;
  const auto r = run_pipeline(s, w.bench.corpus, w.index, w.provider, cfg);
  EXPECT_NE(std::find(r.placeholder_entities.begin(), r.placeholder_entities.end(), e.entity_id),
            r.placeholder_entities.end());
  cfg.imageless = ImagelessPolicy::kDemote;
  const auto d = run_pipeline(s, w.bench.corpus, w.index, w.provider, cfg);
  EXPECT_EQ(d.stage2.back().entity_id, e.entity_id);
}

TEST(Stages, MixedProvidersAreRefused) {
  Planted w(small());
  const DeterministicProvider other(DeterministicOptions{256, 32, 8192});
  EXPECT_OMGM_ERROR(check_same_provider(w.index, other), ErrorCode::kConsistency);
  try {
    run_pipeline(w.bench.samples[0], w.bench.corpus, w.index, other, PipelineConfig{});
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "stage1");
    EXPECT_EQ(e.code(), ErrorCode::kConsistency);
  }
}

TEST(Stages, IndexEntryMissingFromCorpus) {
  Planted w(small());
  std::vector<EntityRecord> fewer(w.bench.corpus.entities().begin() + 1, w.bench.corpus.entities().end());
  const Corpus smaller(std::move(fewer), {});
  const ImageRef probe{"[seed:img-e0000]p", "synth:p", ""};
  EXPECT_OMGM_ERROR(stage1_search(probe, smaller, w.index, w.provider, 5), ErrorCode::kConsistency);
}

TEST(Stages, GenerationAndBatchOrder) {
  Planted w(small());
  PipelineConfig cfg;
  RunOptions opts;
  opts.with_generation = true;
  const auto sequential = run_batch(w.bench.samples, w.bench.corpus, w.index, w.provider, cfg, opts);
  cfg.parallelism = 4;
  const auto parallel = run_batch(w.bench.samples, w.bench.corpus, w.index, w.provider, cfg, opts);
  ASSERT_EQ(sequential.size(), parallel.size());
  for (std::size_t i = 0; i < parallel.size(); ++i) {
    EXPECT_EQ(parallel[i].sample_id, w.bench.samples[i].sample_id);
    EXPECT_EQ(result_to_json(parallel[i], false), result_to_json(sequential[i], false));
    ASSERT_TRUE(parallel[i].result->answer);
    EXPECT_TRUE(parallel[i].result->answer->starts_with("ECHO:System:"));
  }
}

TEST(Stages, ResultLineShape) {
  Planted w(small());
  const auto outcomes = run_batch(std::span(w.bench.samples).first(1), w.bench.corpus, w.index,
                                  w.provider, PipelineConfig{});
  const auto j = result_to_json(outcomes[0], false);
  EXPECT_EQ(j["sample_id"], w.bench.samples[0].sample_id);
  EXPECT_EQ(j["stage1"].size(), 20u);
  EXPECT_TRUE(j["timings_ms"]["stage1"].is_null());
  EXPECT_TRUE(j["answer"].is_null());
  for (const char* key : {"sim_c", "sim_m", "sim_t", "fused_entity", "fused_section"})
    EXPECT_TRUE(j["scores"][key].is_number()) << key;
  EXPECT_TRUE(result_to_json(outcomes[0], true)["timings_ms"]["stage2"].is_number());

  QuerySample bad = w.bench.samples[0];
  bad.image = ImageRef{"x", "https://example.org/x.jpg", ""};
  const auto failed = run_batch(std::span(&bad, 1), w.bench.corpus, w.index, w.provider, PipelineConfig{});
  const auto fj = result_to_json(failed[0], false);
  EXPECT_EQ(fj["error"]["stage"], "stage1");
  EXPECT_EQ(fj["error"]["code"], "resolution");
}

TEST(Prompts, TemplatesAndContext) {
  FinalContext ctx;
  ctx.entity_title = "Dolomites";
  ctx.section = SectionRecord{0, "", "A mountain range."};
  EXPECT_EQ(render_context(ctx.entity_title, ctx.section),
            "# Wiki Article: Dolomites\n## Section Title: Dolomites\nA mountain range.");
  const auto evqa = assemble_prompt(ctx, "Where is it?", PromptStyle::kEvqa);
  EXPECT_TRUE(evqa.ends_with("The answer is:"));
  EXPECT_EQ(evqa, assemble_prompt(ctx, "Where is it?", PromptStyle::kEvqa));
  const auto infoseek = assemble_prompt(ctx, "Where is it?", PromptStyle::kInfoseek);
  EXPECT_NE(infoseek.find("Short answer is: Province of Belluno"), std::string::npos);
  EXPECT_TRUE(infoseek.ends_with("Short answer is:"));
  const auto mllm = assemble_prompt(ctx, "Where is it?", PromptStyle::kEvqa, GeneratorKind::kMllm);
  EXPECT_NE(mllm.find("<image>"), std::string::npos);

  EntityRecord e;
  e.title = "Fox";
  e.sections = {SectionRecord{0, "Diet", "Mice."}};
  const auto summary = summary_prompt(e);
  EXPECT_NE(summary.find("Wiki Summary Generator Assistant"), std::string::npos);
  EXPECT_NE(summary.find("## Section Title: Diet\nMice."), std::string::npos);
}

}  // namespace
}  // namespace omgm
