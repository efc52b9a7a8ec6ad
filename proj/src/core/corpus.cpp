#include "core/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "core/error.hpp"

namespace omgm {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Half-open character span into the article text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

Span trim(std::string_view text, Span s) {
  while (s.begin < s.end && is_space(text[s.begin])) ++s.begin;
  while (s.end > s.begin && is_space(text[s.end - 1])) --s.end;
  return s;
}

// Paragraphs are separated by one or more blank lines.
std::vector<Span> split_paragraphs(std::string_view text, Span region) {
  std::vector<Span> out;
  std::size_t start = region.begin;
  std::size_t pos = region.begin;
  while (pos < region.end) {
    if (text[pos] != '\n') {
      ++pos;
      continue;
    }
    std::size_t probe = pos + 1;
    while (probe < region.end && (text[probe] == ' ' || text[probe] == '\t' || text[probe] == '\r'))
      ++probe;
    if (probe < region.end && text[probe] == '\n') {
      const Span p = trim(text, {start, pos});
      if (p.size() > 0) out.push_back(p);
      while (probe < region.end && is_space(text[probe])) ++probe;
      start = probe;
      pos = probe;
    } else {
      pos = probe;
    }
  }
  const Span last = trim(text, {start, region.end});
  if (last.size() > 0) out.push_back(last);
  return out;
}

void pack_region(std::string_view text, Span region, const std::string& heading,
                 const SegmentationPolicy& policy, std::vector<SectionRecord>& out) {
  const auto paragraphs = split_paragraphs(text, region);
  std::size_t i = 0;
  while (i < paragraphs.size()) {
    Span group = paragraphs[i];
    std::size_t count = 1;
    std::size_t j = i + 1;
    for (; j < paragraphs.size(); ++j) {
      if (policy.max_paragraphs != 0 && count + 1 > policy.max_paragraphs) break;
      if (paragraphs[j].end - group.begin > policy.max_chars) break;
      group.end = paragraphs[j].end;
      ++count;
    }
    out.push_back({static_cast<int>(out.size()), heading,
                   std::string(text.substr(group.begin, group.size()))});
    i = j;
  }
}

std::optional<std::string_view> heading_of(std::string_view line) {
  for (std::string_view marker : {"## ", "# "}) {
    if (line.starts_with(marker)) {
      auto rest = line.substr(marker.size());
      while (!rest.empty() && is_space(rest.front())) rest.remove_prefix(1);
      while (!rest.empty() && is_space(rest.back())) rest.remove_suffix(1);
      return rest;
    }
  }
  return std::nullopt;
}

template <typename T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::kParse, std::string("missing field \"") + key + "\"");
  return j.at(key).get<T>();
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

EntityRecord entity_from_json(const json& j, const SegmentationPolicy& policy) {
  EntityRecord e;
  e.entity_id = require<std::string>(j, "entity_id");
  if (e.entity_id.empty()) throw Error(ErrorCode::kParse, "empty entity_id");
  e.title = j.value("title", std::string{});
  e.summary = optional_string(j, "summary");
  if (j.contains("sections") && !j.at("sections").empty()) {
    for (const auto& s : j.at("sections")) {
      SectionRecord rec;
      rec.index = require<int>(s, "index");
      rec.heading = s.value("heading", std::string{});
      rec.body = require<std::string>(s, "body");
      e.sections.push_back(std::move(rec));
    }
  } else if (auto article = optional_string(j, "article")) {
    e.sections = segment_article(*article, policy);
  }
  for (std::size_t i = 0; i < e.sections.size(); ++i) {
    if (e.sections[i].index != static_cast<int>(i))
      throw Error(ErrorCode::kParse, "entity " + e.entity_id +
                                         ": section indices must be contiguous from 0");
    if (e.sections[i].body.empty())
      throw Error(ErrorCode::kParse,
                  "entity " + e.entity_id + ": section " + std::to_string(i) + " has empty body");
  }
  if (j.contains("main_image") && !j.at("main_image").is_null())
    e.main_image = image_from_json(j.at("main_image"));
  if (j.contains("aux_images"))
    for (const auto& img : j.at("aux_images")) e.aux_images.push_back(image_from_json(img));
  return e;
}

QuerySample sample_from_json(const json& j) {
  QuerySample s;
  s.sample_id = require<std::string>(j, "sample_id");
  s.image = image_from_json(require<json>(j, "image"));
  s.question = require<std::string>(j, "question");
  s.gold_entity_id = optional_string(j, "gold_entity_id");
  if (j.contains("gold_section_index") && !j.at("gold_section_index").is_null())
    s.gold_section_index = j.at("gold_section_index").get<int>();
  if (j.contains("valid_answers"))
    s.valid_answers = j.at("valid_answers").get<std::vector<std::string>>();
  const auto kind = j.value("answer_kind", std::string{"string"});
  if (kind == "string") {
    s.answer_kind = AnswerKind::kString;
  } else if (kind == "numeric") {
    s.answer_kind = AnswerKind::kNumeric;
    for (const auto& a : s.valid_answers)
      if (!parse_numeric_gold(a))
        throw Error(ErrorCode::kParse, "sample " + s.sample_id + ": numeric answer \"" + a +
                                           "\" does not parse to a number or range");
  } else {
    throw Error(ErrorCode::kParse, "unknown answer_kind \"" + kind + "\"");
  }
  return s;
}

}  // namespace

std::optional<NumericGold> parse_numeric_gold(std::string_view text) {
  auto strip = [](std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
  };
  auto number = [&](std::string_view s) -> std::optional<double> {
    s = strip(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
  };
  text = strip(text);
  if (text.size() >= 2 && text.front() == '[' && text.back() == ']') {
    const auto inner = text.substr(1, text.size() - 2);
    const auto comma = inner.find(',');
    if (comma == std::string_view::npos) return std::nullopt;
    const auto lo = number(inner.substr(0, comma));
    const auto hi = number(inner.substr(comma + 1));
    if (!lo || !hi || *lo > *hi) return std::nullopt;
    return NumericGold{*lo, *hi};
  }
  if (const auto v = number(text)) return NumericGold{*v, *v};
  return std::nullopt;
}

ordered_json CorpusManifest::to_json() const {
  ordered_json j;
  j["counts"] = {{"entities", entities}, {"sections", sections}, {"images", images},
                 {"summaries", summaries}};
  j["missing_main_image"] = missing_main_image;
  j["missing_summary"] = missing_summary;
  j["segmentation"] = {{"heading_markers", {"# ", "## "}},
                       {"max_chars", policy.max_chars},
                       {"max_paragraphs", policy.max_paragraphs}};
  return j;
}

std::vector<SectionRecord> segment_article(std::string_view raw_text,
                                           const SegmentationPolicy& policy) {
  if (raw_text.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw Error(ErrorCode::kInvalidArgument, "segment_article: empty article text");
  if (policy.max_chars == 0)
    throw Error(ErrorCode::kInvalidArgument, "segment_article: max_chars must be positive");

  struct Block {
    std::string heading;
    Span body;
  };
  std::vector<Block> blocks{{"", {0, 0}}};
  std::size_t pos = 0;
  while (pos < raw_text.size()) {
    const auto nl = raw_text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? raw_text.size() : nl;
    const auto next = nl == std::string_view::npos ? raw_text.size() : nl + 1;
    if (auto h = heading_of(raw_text.substr(pos, end - pos))) {
      blocks.back().body.end = pos;
      blocks.push_back({std::string(*h), {next, next}});
    }
    pos = next;
  }
  blocks.back().body.end = raw_text.size();

  std::vector<SectionRecord> out;
  for (const auto& b : blocks) {
    const Span body = trim(raw_text, b.body);
    if (body.size() == 0) continue;
    pack_region(raw_text, body, b.heading, policy, out);
  }
  return out;
}

Corpus::Corpus(std::vector<EntityRecord> entities, SegmentationPolicy policy)
    : entities_(std::move(entities)), policy_(policy) {
  by_id_.reserve(entities_.size());
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    if (!by_id_.emplace(entities_[i].entity_id, i).second)
      throw Error(ErrorCode::kDuplicateId, "duplicate entity_id \"" + entities_[i].entity_id + "\"");
  }
}

const EntityRecord* Corpus::find(std::string_view entity_id) const {
  const auto it = by_id_.find(std::string(entity_id));
  return it == by_id_.end() ? nullptr : &entities_[it->second];
}

const EntityRecord& Corpus::at(std::string_view entity_id) const {
  if (const auto* e = find(entity_id)) return *e;
  throw Error(ErrorCode::kNotFound, "unknown entity_id \"" + std::string(entity_id) + "\"");
}

Corpus Corpus::with_summaries(const std::map<std::string, std::string>& summaries) const {
  std::vector<std::string> unknown;
  for (const auto& [id, _] : summaries)
    if (!find(id)) unknown.push_back(id);
  if (!unknown.empty()) {
    std::string msg = "attach_summaries: unknown entity ids:";
    for (const auto& id : unknown) msg += " " + id;
    throw Error(ErrorCode::kNotFound, msg);
  }
  Corpus next = *this;
  for (const auto& [id, text] : summaries) next.entities_[by_id_.at(id)].summary = text;
  next.revision_ = revision_ + (summaries.empty() ? 0 : 1);
  return next;
}

Corpus parse_corpus(std::string_view jsonl, const SegmentationPolicy& policy) {
  std::vector<EntityRecord> entities;
  std::set<std::string> seen;
  for_each_line(jsonl, [&](std::size_t line_no, std::string_view line) {
    EntityRecord e;
    try {
      e = entity_from_json(json::parse(line), policy);
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::kParse, "corpus line " + std::to_string(line_no) + ": " + ex.what());
    } catch (const Error& ex) {
      throw Error(ex.code(), "corpus line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (!seen.insert(e.entity_id).second)
      throw Error(ErrorCode::kDuplicateId, "corpus line " + std::to_string(line_no) +
                                               ": duplicate entity_id \"" + e.entity_id + "\"");
    entities.push_back(std::move(e));
  });
  return Corpus(std::move(entities), policy);
}

Corpus load_corpus(const std::string& path, CorpusFormat format, const SegmentationPolicy& policy) {
  if (format != CorpusFormat::kJsonl)
    throw Error(ErrorCode::kInvalidArgument, "unsupported corpus format");
  return parse_corpus(read_file(path), policy);
}

ordered_json image_to_json(const ImageRef& image) {
  ordered_json j;
  j["ref_id"] = image.ref_id;
  if (image.inline_bytes())
    j["bytes_b64"] = image.bytes_b64;
  else
    j["uri"] = image.uri;
  return j;
}

ImageRef image_from_json(const json& j) {
  ImageRef img;
  img.ref_id = require<std::string>(j, "ref_id");
  img.uri = j.value("uri", std::string{});
  img.bytes_b64 = j.value("bytes_b64", std::string{});
  if (img.uri.empty() == img.bytes_b64.empty())
    throw Error(ErrorCode::kParse,
                "image " + img.ref_id + ": exactly one of \"uri\" or \"bytes_b64\" required");
  return img;
}

ordered_json entity_to_json(const EntityRecord& e) {
  ordered_json j;
  j["entity_id"] = e.entity_id;
  j["title"] = e.title;
  j["summary"] = e.summary ? ordered_json(*e.summary) : ordered_json(nullptr);
  auto sections = ordered_json::array();
  for (const auto& s : e.sections) {
    ordered_json sj;
    sj["index"] = s.index;
    sj["heading"] = s.heading;
    sj["body"] = s.body;
    sections.push_back(std::move(sj));
  }
  j["sections"] = std::move(sections);
  j["main_image"] = e.main_image ? image_to_json(*e.main_image) : ordered_json(nullptr);
  auto aux = ordered_json::array();
  for (const auto& img : e.aux_images) aux.push_back(image_to_json(img));
  j["aux_images"] = std::move(aux);
  return j;
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& e : corpus.entities()) {
    out += entity_to_json(e).dump();
    out += '\n';
  }
  return out;
}

void persist_corpus(const Corpus& corpus, const std::string& path) {
  write_file(path, serialize_corpus(corpus));
}

Corpus attach_summaries(const Corpus& corpus, const std::map<std::string, std::string>& summaries) {
  return corpus.with_summaries(summaries);
}

CorpusManifest validate_corpus(const Corpus& corpus) {
  CorpusManifest m;
  m.policy = corpus.policy();
  m.entities = corpus.size();
  for (const auto& e : corpus.entities()) {
    m.sections += e.sections.size();
    m.images += e.aux_images.size() + (e.main_image ? 1 : 0);
    if (e.summary && !e.summary->empty())
      ++m.summaries;
    else
      m.missing_summary.push_back(e.entity_id);
    if (!e.main_image) m.missing_main_image.push_back(e.entity_id);
  }
  return m;
}

ordered_json sample_to_json(const QuerySample& s) {
  ordered_json j;
  j["sample_id"] = s.sample_id;
  j["image"] = image_to_json(s.image);
  j["question"] = s.question;
  j["gold_entity_id"] = s.gold_entity_id ? ordered_json(*s.gold_entity_id) : ordered_json(nullptr);
  j["gold_section_index"] =
      s.gold_section_index ? ordered_json(*s.gold_section_index) : ordered_json(nullptr);
  j["valid_answers"] = s.valid_answers;
  j["answer_kind"] = s.answer_kind == AnswerKind::kNumeric ? "numeric" : "string";
  return j;
}

std::vector<QuerySample> parse_samples(std::string_view jsonl) {
  std::vector<QuerySample> out;
  std::set<std::string> seen;
  for_each_line(jsonl, [&](std::size_t line_no, std::string_view line) {
    try {
      out.push_back(sample_from_json(json::parse(line)));
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::kParse, "samples line " + std::to_string(line_no) + ": " + ex.what());
    } catch (const Error& ex) {
      throw Error(ex.code(), "samples line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (!seen.insert(out.back().sample_id).second)
      throw Error(ErrorCode::kDuplicateId, "samples line " + std::to_string(line_no) +
                                               ": duplicate sample_id \"" +
                                               out.back().sample_id + "\"");
  });
  return out;
}

std::vector<QuerySample> load_samples(const std::string& path) {
  return parse_samples(read_file(path));
}

std::string serialize_samples(const std::vector<QuerySample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open \"" + path + "\" for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open \"" + path + "\" for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::kIo, "write to \"" + path + "\" failed");
}

}  // namespace omgm
