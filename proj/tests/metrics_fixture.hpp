#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/eval.hpp"

namespace omgm::test {

// The 50-sample metrics table with its independently computed expectations.
struct MetricsFixture {
  std::vector<ResultRecord> results;
  std::vector<QuerySample> samples;
  std::vector<nlohmann::json> expected_per_sample;
  nlohmann::json expected;
  double tolerance = 0.0;
};

inline MetricsFixture load_metrics_fixture(const std::string& path) {
  const auto j = nlohmann::json::parse(read_file(path));
  MetricsFixture f;
  f.tolerance = j.at("tolerance").get<double>();
  f.expected = j.at("expected");
  for (const auto& s : j.at("samples")) {
    QuerySample q;
    q.sample_id = s.at("sample_id").get<std::string>();
    q.image = ImageRef{"i", "synth:i", ""};
    q.question = "?";
    q.gold_entity_id = s.at("gold_entity_id").get<std::string>();
    q.valid_answers = s.at("valid_answers").get<std::vector<std::string>>();
    q.answer_kind = s.at("answer_kind") == "numeric" ? AnswerKind::kNumeric : AnswerKind::kString;
    f.samples.push_back(q);
    ResultRecord r;
    r.sample_id = q.sample_id;
    r.stage1 = s.at("ranking").get<std::vector<std::string>>();
    r.top1_entity = r.stage1.front();
    r.answer = s.at("prediction").get<std::string>();
    f.results.push_back(r);
    f.expected_per_sample.push_back(s.at("expected"));
  }
  return f;
}

inline RunConfig metrics_config(const MetricsFixture& f) {
  RunConfig c;
  c.eval.relaxed_tolerance = f.tolerance;
  c.eval.recall_ks.clear();
  for (const auto& [k, v] : f.expected.at("recall").items()) c.eval.recall_ks.push_back(std::stoul(k));
  return c;
}

}  // namespace omgm::test
