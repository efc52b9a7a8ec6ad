#include "omgm/omgm.h"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

class CApi : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("omgm-capi-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(dir_);
    ASSERT_EQ(omgm_config_create(&config_), OMGM_OK);
    ASSERT_EQ(omgm_provider_create(config_, &provider_), OMGM_OK);
  }
  void TearDown() override {
    omgm_provider_destroy(provider_);
    omgm_config_destroy(config_);
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Takes ownership of a returned string.
  static std::string take(char* s) {
    std::string out = s ? s : "";
    omgm_string_free(s);
    return out;
  }

  fs::path dir_;
  omgm_config* config_ = nullptr;
  omgm_provider* provider_ = nullptr;
};

TEST_F(CApi, VersionAndStatusNames) {
  EXPECT_STREQ(omgm_version(), "0.1.0");
  EXPECT_STREQ(omgm_status_name(OMGM_OK), "ok");
  EXPECT_STREQ(omgm_status_name(OMGM_ERR_CONSISTENCY), "consistency");
}

TEST_F(CApi, ConfigErrorsSetLastError) {
  EXPECT_EQ(omgm_config_set(config_, "alpha", "0.5"), OMGM_OK);
  EXPECT_EQ(omgm_config_set(config_, "no_such_key", "1"), OMGM_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(omgm_last_error()).find("no_such_key"), std::string::npos);
  EXPECT_EQ(omgm_config_set(config_, "alpha", "2"), OMGM_OK);
  EXPECT_EQ(omgm_config_validate(config_), OMGM_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(omgm_config_set(config_, "alpha", "0.9"), OMGM_OK);
  char* json = nullptr;
  ASSERT_EQ(omgm_config_to_json(config_, &json), OMGM_OK);
  EXPECT_NE(take(json).find("\"alpha\":0.9"), std::string::npos);
  EXPECT_EQ(omgm_config_create(nullptr), OMGM_ERR_INVALID_ARGUMENT);
}

TEST_F(CApi, SynthQueryEvaluateFlow) {
  char* out = nullptr;
  ASSERT_EQ(omgm_synth_benchmark(R"({"entities":80,"samples":20,"seed":3})", dir_.c_str(), provider_,
                                 config_, &out),
            OMGM_OK)
      << omgm_last_error();
  take(out);

  omgm_corpus* corpus = nullptr;
  ASSERT_EQ(omgm_corpus_load(path("corpus.jsonl").c_str(), config_, &corpus), OMGM_OK);
  EXPECT_EQ(omgm_corpus_size(corpus), 80u);
  char* manifest = nullptr;
  ASSERT_EQ(omgm_corpus_manifest(corpus, &manifest), OMGM_OK);
  EXPECT_NE(take(manifest).find("\"entities\":80"), std::string::npos);

  omgm_index* built = nullptr;
  ASSERT_EQ(omgm_index_build(corpus, provider_, config_, &built), OMGM_OK);
  omgm_index* loaded = nullptr;
  ASSERT_EQ(omgm_index_load(path("index.bin").c_str(), &loaded), OMGM_OK);
  EXPECT_EQ(omgm_index_size(loaded), 80u);
  EXPECT_EQ(omgm_index_dims(loaded), omgm_index_dims(built));
  std::vector<double> q(omgm_index_dims(loaded), 0.0);
  q[0] = 1.0;
  char* a = nullptr;
  char* b = nullptr;
  ASSERT_EQ(omgm_index_search(loaded, q.data(), q.size(), 5, &a), OMGM_OK);
  ASSERT_EQ(omgm_index_search(built, q.data(), q.size(), 5, &b), OMGM_OK);
  EXPECT_EQ(take(a), take(b));
  EXPECT_EQ(omgm_index_search(loaded, q.data(), q.size() - 1, 5, &a), OMGM_ERR_DIMS_MISMATCH);
  omgm_index_destroy(built);
  omgm_index_destroy(loaded);
  omgm_corpus_destroy(corpus);

  ASSERT_EQ(omgm_query(path("samples.jsonl").c_str(), path("corpus.jsonl").c_str(), path("index.bin").c_str(),
                       path("results.jsonl").c_str(), provider_, config_, &out),
            OMGM_OK)
      << omgm_last_error();
  EXPECT_NE(take(out).find("\"failed\":0"), std::string::npos);
  ASSERT_EQ(omgm_evaluate(path("results.jsonl").c_str(), path("samples.jsonl").c_str(),
                          path("report.json").c_str(), config_, &out),
            OMGM_OK);
  EXPECT_NE(take(out).find("\"1\":1.0"), std::string::npos);

  const double grid[] = {0.0, 0.9};
  ASSERT_EQ(omgm_sweep("alpha", grid, 2, path("samples.jsonl").c_str(), path("corpus.jsonl").c_str(),
                       path("index.bin").c_str(), path("sweep.csv").c_str(), provider_, config_, nullptr),
            OMGM_OK);
  EXPECT_TRUE(fs::exists(path("sweep.csv")));
  EXPECT_TRUE(fs::exists(path("sweep.json")));
  EXPECT_EQ(omgm_sweep("gamma", grid, 2, path("samples.jsonl").c_str(), path("corpus.jsonl").c_str(),
                       path("index.bin").c_str(), path("sweep.csv").c_str(), provider_, config_, nullptr),
            OMGM_ERR_INVALID_ARGUMENT);
}

TEST_F(CApi, ProviderMismatchIsAConsistencyError) {
  ASSERT_EQ(omgm_synth_benchmark(R"({"entities":30,"samples":5})", dir_.c_str(), provider_, config_, nullptr),
            OMGM_OK);
  omgm_config* other_cfg = nullptr;
  omgm_provider* other = nullptr;
  ASSERT_EQ(omgm_config_create(&other_cfg), OMGM_OK);
  ASSERT_EQ(omgm_config_set(other_cfg, "provider.dense_dims", "128"), OMGM_OK);
  ASSERT_EQ(omgm_provider_create(other_cfg, &other), OMGM_OK);
  EXPECT_EQ(omgm_query(path("samples.jsonl").c_str(), path("corpus.jsonl").c_str(), path("index.bin").c_str(),
                       path("results.jsonl").c_str(), other, other_cfg, nullptr),
            OMGM_ERR_CONSISTENCY);
  EXPECT_NE(std::string(omgm_last_error()).find("retrieval-pipeline"), std::string::npos) << omgm_last_error();
  omgm_provider_destroy(other);
  omgm_config_destroy(other_cfg);
}

TEST_F(CApi, CorpusErrorsAndSegmentation) {
  omgm_corpus* corpus = nullptr;
  EXPECT_EQ(omgm_corpus_load(path("missing.jsonl").c_str(), config_, &corpus), OMGM_ERR_IO);
  std::ofstream(path("dup.jsonl")) << R"({"entity_id":"a","sections":[{"index":0,"body":"x"}]})" "\n"
                                   << R"({"entity_id":"a","sections":[{"index":0,"body":"y"}]})" "\n";
  EXPECT_EQ(omgm_corpus_load(path("dup.jsonl").c_str(), config_, &corpus), OMGM_ERR_DUPLICATE_ID);
  EXPECT_EQ(corpus, nullptr);

  char* json = nullptr;
  ASSERT_EQ(omgm_segment_article("# A\nOne.\n# B\nTwo.", 2000, 0, &json), OMGM_OK);
  EXPECT_EQ(take(json),
            R"([{"index":0,"heading":"A","body":"One."},{"index":1,"heading":"B","body":"Two."}])");
  EXPECT_EQ(omgm_segment_article("", 2000, 0, &json), OMGM_ERR_INVALID_ARGUMENT);
}

TEST_F(CApi, AttachSummariesAndSave) {
  std::ofstream(path("c.jsonl")) << R"({"entity_id":"a","title":"A","sections":[{"index":0,"body":"x"}]})" "\n";
  omgm_corpus* corpus = nullptr;
  ASSERT_EQ(omgm_corpus_load(path("c.jsonl").c_str(), config_, &corpus), OMGM_OK);
  omgm_corpus* next = nullptr;
  EXPECT_EQ(omgm_corpus_attach_summaries(corpus, R"({"zz":"s"})", &next), OMGM_ERR_NOT_FOUND);
  ASSERT_EQ(omgm_corpus_attach_summaries(corpus, R"({"a":"About A."})", &next), OMGM_OK);
  ASSERT_EQ(omgm_corpus_save(next, path("out.jsonl").c_str()), OMGM_OK);
  std::stringstream ss;
  ss << std::ifstream(path("out.jsonl")).rdbuf();
  EXPECT_NE(ss.str().find("About A."), std::string::npos);
  omgm_corpus_destroy(next);
  omgm_corpus_destroy(corpus);
}

}  // namespace
