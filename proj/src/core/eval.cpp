#include "core/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "core/error.hpp"

namespace omgm {

using nlohmann::ordered_json;

double recall_at_k(const std::vector<std::vector<std::string>>& ranked,
                   const std::vector<std::string>& gold, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "recall_at_k: K must be >= 1");
  if (ranked.size() != gold.size())
    throw Error(ErrorCode::kInvalidArgument, "recall_at_k: one ranking per gold id required");
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto end = ranked[i].begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked[i].size()));
    if (std::find(ranked[i].begin(), end, gold[i]) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double section_recall_at_1(std::span<const SectionHit> predicted, std::span<const SectionHit> gold) {
  if (predicted.size() != gold.size())
    throw Error(ErrorCode::kInvalidArgument, "section_recall_at_1: size mismatch");
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (predicted[i].entity_id == gold[i].entity_id &&
        predicted[i].section_index == gold[i].section_index)
      ++hits;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

std::string normalize_answer(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
  }
  auto terminal = [](char c) {
    return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
  };
  while (!out.empty() && (terminal(out.back()) || out.back() == ' ')) out.pop_back();
  for (std::string_view article : {"the ", "an ", "a "}) {
    if (out.starts_with(article)) {
      out.erase(0, article.size());
      break;
    }
  }
  return out;
}

int vqa_accuracy(std::string_view prediction, std::span<const std::string> valid_answers) {
  const auto p = normalize_answer(prediction);
  for (const auto& a : valid_answers)
    if (normalize_answer(a) == p) return 1;
  return 0;
}

std::optional<double> parse_prediction_number(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const bool digit = std::isdigit(static_cast<unsigned char>(text[i]));
    const bool lead = (text[i] == '-' || text[i] == '.') && i + 1 < text.size() &&
                      std::isdigit(static_cast<unsigned char>(text[i + 1]));
    if (!digit && !lead) continue;
    std::string number;
    std::size_t j = i;
    if (text[j] == '-') number.push_back(text[j++]);
    for (; j < text.size(); ++j) {
      const char c = text[j];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        number.push_back(c);
      } else if (c == ',' && j + 1 < text.size() &&
                 std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
        continue;
      } else {
        break;
      }
    }
    if (!number.empty() && number.back() == '.') number.pop_back();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), v);
    if (ec == std::errc{} && ptr != number.data()) return v;
    return std::nullopt;
  }
  return std::nullopt;
}

int relaxed_accuracy(std::string_view prediction, const NumericGold& gold, double tolerance) {
  if (tolerance < 0.0) throw Error(ErrorCode::kInvalidArgument, "relaxed_accuracy: negative tolerance");
  const auto pred = parse_prediction_number(prediction);
  if (!pred) return 0;
  if (gold.is_range()) return (*pred >= gold.lo && *pred <= gold.hi) ? 1 : 0;
  if (gold.lo == 0.0) return *pred == 0.0 ? 1 : 0;
  return std::abs(*pred - gold.lo) <= tolerance * std::abs(gold.lo) ? 1 : 0;
}

LatencyStats summarize_latency(std::span<const double> values_ms) {
  if (values_ms.empty()) throw Error(ErrorCode::kInvalidArgument, "summarize_latency: no samples");
  std::vector<double> v(values_ms.begin(), values_ms.end());
  std::sort(v.begin(), v.end());
  auto rank = [&](double p) {
    const auto r = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(r, 1, v.size()) - 1];
  };
  LatencyStats s;
  s.count = v.size();
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.p50 = rank(50.0);
  s.p95 = rank(95.0);
  s.max = v.back();
  return s;
}

std::map<std::string, LatencyStats> measure_latency(std::span<const StageTimings> runs) {
  if (runs.empty()) throw Error(ErrorCode::kInvalidArgument, "measure_latency: no run records");
  std::map<std::string, std::vector<double>> by_stage;
  for (const auto& t : runs) {
    by_stage["stage1"].push_back(t.stage1_ms);
    by_stage["stage2"].push_back(t.stage2_ms);
    by_stage["stage3"].push_back(t.stage3_ms);
    by_stage["retrieval"].push_back(t.stage1_ms + t.stage2_ms);
    if (t.generate_ms) by_stage["generate"].push_back(*t.generate_ms);
  }
  std::map<std::string, LatencyStats> out;
  for (const auto& [stage, values] : by_stage) out[stage] = summarize_latency(values);
  return out;
}

ResultRecord record_from_outcome(const SampleOutcome& outcome) {
  ResultRecord r;
  r.sample_id = outcome.sample_id;
  if (!outcome.result) {
    r.error = outcome.error ? outcome.error->what() : "failed";
    return r;
  }
  const auto& p = *outcome.result;
  for (const auto& s : p.stage1) r.stage1.push_back(s.entity_id);
  for (const auto& s : p.stage2) r.stage2.push_back(s.entity_id);
  r.top1_entity = p.context.entity_id;
  r.best_section_index = p.context.section.index;
  r.answer = p.answer;
  r.timings = p.timings;
  return r;
}

std::vector<ResultRecord> parse_results(std::string_view jsonl) {
  std::vector<ResultRecord> out;
  for_each_line(jsonl, [&](std::size_t line_no, std::string_view line) {
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("omgm_header")) return;
      ResultRecord r;
      r.sample_id = j.at("sample_id").get<std::string>();
      if (j.contains("error")) {
        r.error = j.at("error").value("message", std::string{"failed"});
        out.push_back(std::move(r));
        return;
      }
      for (const auto& s : j.at("stage1")) r.stage1.push_back(s.at("entity_id").get<std::string>());
      if (j.contains("stage2"))
        for (const auto& s : j.at("stage2")) r.stage2.push_back(s.at("entity_id").get<std::string>());
      r.top1_entity = j.at("top1_entity").get<std::string>();
      r.best_section_index = j.at("best_section_index").get<int>();
      if (!j.at("answer").is_null()) r.answer = j.at("answer").get<std::string>();
      const auto& t = j.at("timings_ms");
      if (!t.at("stage1").is_null()) {
        StageTimings st;
        st.stage1_ms = t.at("stage1").get<double>();
        st.stage2_ms = t.at("stage2").get<double>();
        st.stage3_ms = t.at("stage3").get<double>();
        if (!t.at("generate").is_null()) st.generate_ms = t.at("generate").get<double>();
        r.timings = st;
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "results line " + std::to_string(line_no) + ": " + e.what());
    }
  });
  return out;
}

std::vector<ResultRecord> load_results(const std::string& path) {
  return parse_results(read_file(path));
}

namespace {

ordered_json latency_json(const std::map<std::string, LatencyStats>& latency) {
  ordered_json j = ordered_json::object();
  for (const auto& [stage, s] : latency)
    j[stage] = {{"count", s.count}, {"mean", s.mean}, {"p50", s.p50}, {"p95", s.p95}, {"max", s.max}};
  return j;
}

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

ordered_json EvalReport::to_json() const {
  ordered_json j;
  j["config"] = config;
  ordered_json recall_j = ordered_json::object();
  for (const auto& [k, v] : recall) recall_j[std::to_string(k)] = v;
  ordered_json stage1_j = ordered_json::object();
  for (const auto& [k, v] : stage1_recall) stage1_j[std::to_string(k)] = v;
  j["metrics"] = {{"recall", std::move(recall_j)},
                  {"stage1_recall", std::move(stage1_j)},
                  {"section_recall_1", optional_number(section_recall_1)},
                  {"vqa_acc", optional_number(vqa_acc)},
                  {"relaxed_acc", optional_number(relaxed_acc)},
                  {"evaluated", evaluated},
                  {"failed", failed}};
  j["latency_ms"] = latency_json(latency);
  j["samples"] = samples;
  return j;
}

EvalReport evaluate(std::span<const ResultRecord> results, std::span<const QuerySample> gold,
                    const RunConfig& config) {
  EvalReport report;
  report.config = config.to_json();
  std::unordered_map<std::string, const QuerySample*> by_id;
  for (const auto& s : gold) by_id.emplace(s.sample_id, &s);

  std::vector<std::vector<std::string>> final_rank;
  std::vector<std::vector<std::string>> coarse_rank;
  std::vector<std::string> gold_ids;
  std::vector<SectionHit> predicted_sections;
  std::vector<SectionHit> gold_sections;
  std::size_t vqa_n = 0, vqa_hits = 0, relaxed_n = 0, relaxed_hits = 0;
  std::vector<StageTimings> timings;

  for (const auto& r : results) {
    const auto it = by_id.find(r.sample_id);
    if (it == by_id.end())
      throw Error(ErrorCode::kNotFound, "evaluate: result for unknown sample \"" + r.sample_id + "\"");
    const auto& s = *it->second;
    ++report.evaluated;
    if (r.error) ++report.failed;
    if (r.timings) timings.push_back(*r.timings);

    ordered_json sj;
    sj["sample_id"] = r.sample_id;
    if (s.gold_entity_id) {
      final_rank.push_back(r.stage2.empty() ? r.stage1 : r.stage2);
      coarse_rank.push_back(r.stage1);
      gold_ids.push_back(*s.gold_entity_id);
      const auto& ranking = final_rank.back();
      const auto pos = std::find(ranking.begin(), ranking.end(), *s.gold_entity_id);
      sj["gold_rank"] = pos == ranking.end() ? ordered_json(nullptr)
                                             : ordered_json(pos - ranking.begin() + 1);
      if (s.gold_section_index) {
        predicted_sections.push_back({r.top1_entity, r.best_section_index});
        gold_sections.push_back({*s.gold_entity_id, *s.gold_section_index});
        sj["section_hit"] = r.top1_entity == *s.gold_entity_id &&
                            r.best_section_index == *s.gold_section_index;
      }
    }
    if (r.answer && !s.valid_answers.empty()) {
      if (s.answer_kind == AnswerKind::kString) {
        const int hit = vqa_accuracy(*r.answer, s.valid_answers);
        ++vqa_n;
        vqa_hits += static_cast<std::size_t>(hit);
        sj["vqa"] = hit;
      } else {
        int hit = 0;
        for (const auto& a : s.valid_answers)
          hit = std::max(hit, relaxed_accuracy(*r.answer, *parse_numeric_gold(a),
                                               config.eval.relaxed_tolerance));
        ++relaxed_n;
        relaxed_hits += static_cast<std::size_t>(hit);
        sj["relaxed"] = hit;
      }
    }
    if (r.error) sj["error"] = *r.error;
    report.samples.push_back(std::move(sj));
  }

  if (!gold_ids.empty()) {
    for (auto k : config.eval.recall_ks) {
      report.recall[k] = recall_at_k(final_rank, gold_ids, k);
      report.stage1_recall[k] = recall_at_k(coarse_rank, gold_ids, k);
    }
  }
  if (!gold_sections.empty())
    report.section_recall_1 = section_recall_at_1(predicted_sections, gold_sections);
  if (vqa_n) report.vqa_acc = static_cast<double>(vqa_hits) / static_cast<double>(vqa_n);
  if (relaxed_n) report.relaxed_acc = static_cast<double>(relaxed_hits) / static_cast<double>(relaxed_n);
  if (!timings.empty()) report.latency = measure_latency(timings);
  return report;
}

SweepParam parse_sweep_param(const std::string& s) {
  if (s == "alpha") return SweepParam::kAlpha;
  if (s == "beta") return SweepParam::kBeta;
  if (s == "k") return SweepParam::kK;
  throw Error(ErrorCode::kInvalidArgument, "unknown sweep parameter \"" + s + "\"");
}

const char* to_string(SweepParam p) {
  switch (p) {
    case SweepParam::kAlpha: return "alpha";
    case SweepParam::kBeta: return "beta";
    case SweepParam::kK: return "k";
  }
  return "?";
}

std::vector<SweepRow> sweep(SweepParam param, std::span<const double> grid,
                            const Benchmark& benchmark, std::shared_ptr<const Provider> provider,
                            const RunConfig& config) {
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "sweep: empty grid");
  const bool report_latency = config.pipeline.parallelism <= 1;
  std::shared_ptr<const Provider> shared_cache;
  if (param != SweepParam::kK) shared_cache = std::make_shared<CachingProvider>(provider);

  std::vector<SweepRow> rows;
  for (double value : grid) {
    RunConfig point = config;
    switch (param) {
      case SweepParam::kAlpha: point.pipeline.alpha = value; break;
      case SweepParam::kBeta: point.pipeline.beta = value; break;
      case SweepParam::kK:
        if (value < 1.0 || value != std::floor(value))
          throw Error(ErrorCode::kInvalidArgument, "sweep: k grid values must be positive integers");
        point.pipeline.k = static_cast<std::size_t>(value);
        break;
    }
    point.pipeline.validate();
    const auto& p = shared_cache ? shared_cache : provider;
    const RunOptions options{point.with_generation, point.style, {point.max_tokens}};
    const auto outcomes =
        run_batch(benchmark.samples, benchmark.corpus, benchmark.index, *p, point.pipeline, options);

    std::vector<ResultRecord> records;
    records.reserve(outcomes.size());
    for (const auto& o : outcomes) records.push_back(record_from_outcome(o));
    SweepRow row;
    row.value = value;
    row.report = evaluate(records, benchmark.samples, point);
    if (!report_latency) row.report.latency.clear();
    row.latency = row.report.latency;

    for (const auto& [k, v] : row.report.recall) row.metrics.emplace_back("recall@" + std::to_string(k), v);
    for (const auto& [k, v] : row.report.stage1_recall)
      row.metrics.emplace_back("stage1_recall@" + std::to_string(k), v);
    std::vector<std::vector<std::string>> coarse;
    std::vector<std::string> gold;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!benchmark.samples[i].gold_entity_id) continue;
      coarse.push_back(records[i].stage1);
      gold.push_back(*benchmark.samples[i].gold_entity_id);
    }
    if (!gold.empty())
      row.metrics.emplace_back("stage1_recall@scope", recall_at_k(coarse, gold, point.pipeline.k));
    if (row.report.section_recall_1) row.metrics.emplace_back("section_recall@1", *row.report.section_recall_1);
    if (row.report.vqa_acc) row.metrics.emplace_back("vqa_acc", *row.report.vqa_acc);
    if (row.report.relaxed_acc) row.metrics.emplace_back("relaxed_acc", *row.report.relaxed_acc);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string number_text(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ec == std::errc{} ? end : buf);
}

}  // namespace

std::string sweep_csv(SweepParam param, std::span<const SweepRow> rows) {
  std::string out = "param,value,metric,metric_value,latency_ms_mean\n";
  for (const auto& row : rows) {
    const auto it = row.latency.find("retrieval");
    const std::string latency = it == row.latency.end() ? "" : number_text(it->second.mean);
    for (const auto& [name, v] : row.metrics) {
      out += to_string(param);
      out += ',' + number_text(row.value) + ',' + name + ',' + number_text(v) + ',' + latency + '\n';
    }
  }
  return out;
}

ordered_json sweep_json(SweepParam param, std::span<const SweepRow> rows, const RunConfig& config) {
  ordered_json j;
  j["config"] = config.to_json();
  j["param"] = to_string(param);
  auto points = ordered_json::array();
  for (const auto& row : rows) {
    ordered_json pj;
    pj["value"] = row.value;
    ordered_json metrics = ordered_json::object();
    for (const auto& [name, v] : row.metrics) metrics[name] = v;
    pj["metrics"] = std::move(metrics);
    pj["latency_ms"] = latency_json(row.latency);
    points.push_back(std::move(pj));
  }
  j["points"] = std::move(points);
  return j;
}

}  // namespace omgm
