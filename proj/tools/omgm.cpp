// omgm command-line tool. Links only the C interface.
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "omgm/omgm.h"

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct UsageError {
  std::string message;
};

struct DomainError {
  std::string message;
};

struct Common {
  std::string config_path;
  std::optional<std::string> k, alpha, beta, provider_url, seed, style, parallelism;
  bool with_generation = false;
  bool timings = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "TOML-style config file")->check(CLI::ExistingFile);
  cmd->add_option("--k", c.k, "rerank scope");
  cmd->add_option("--alpha", c.alpha, "entity fusion weight");
  cmd->add_option("--beta", c.beta, "section fusion weight");
  cmd->add_option("--provider-url", c.provider_url, "model service base URL");
  cmd->add_option("--seed", c.seed, "run seed");
  cmd->add_option("--parallelism", c.parallelism, "samples in flight");
  cmd->add_option("--style", c.style, "answer prompt style")
      ->check(CLI::IsMember({"evqa", "infoseek"}));
  cmd->add_flag("--with-generation", c.with_generation, "generate answers");
  cmd->add_flag("--timings", c.timings, "record per-stage wall-clock times");
  cmd->add_option("--set", c.overrides, "extra config entry key=value")->type_name("KEY=VALUE");
}

struct Handle {
  omgm_config* config = nullptr;
  omgm_provider* provider = nullptr;

  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    omgm_provider_destroy(provider);
    omgm_config_destroy(config);
  }
};

void check_usage(omgm_status s, const std::string& where) {
  if (s != OMGM_OK) throw UsageError{where + ": " + omgm_last_error()};
}

void check_domain(omgm_status s) {
  if (s != OMGM_OK)
    throw DomainError{std::string(omgm_status_name(s)) + ": " + omgm_last_error()};
}

// defaults < config file < environment < flags
void resolve_config(const Common& c, Handle& h) {
  check_domain(omgm_config_create(&h.config));
  if (!c.config_path.empty()) check_usage(omgm_config_load_file(h.config, c.config_path.c_str()), "--config");
  check_usage(omgm_config_apply_env(h.config), "environment");
  auto set = [&](const char* flag, const char* key, const std::optional<std::string>& v) {
    if (v) check_usage(omgm_config_set(h.config, key, v->c_str()), flag);
  };
  set("--k", "k", c.k);
  set("--alpha", "alpha", c.alpha);
  set("--beta", "beta", c.beta);
  set("--provider-url", "provider_url", c.provider_url);
  set("--seed", "seed", c.seed);
  set("--parallelism", "parallelism", c.parallelism);
  set("--style", "style", c.style);
  if (c.with_generation) check_usage(omgm_config_set(h.config, "with_generation", "true"), "--with-generation");
  if (c.timings) check_usage(omgm_config_set(h.config, "record_timings", "true"), "--timings");
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError{"--set: expected KEY=VALUE, got \"" + kv + "\""};
    check_usage(omgm_config_set(h.config, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "--set");
  }
  check_usage(omgm_config_validate(h.config), "config");
}

void make_provider(Handle& h) { check_domain(omgm_provider_create(h.config, &h.provider)); }

void print_summary(char* json) {
  if (!json) return;
  std::printf("%s\n", json);
  omgm_string_free(json);
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0') throw UsageError{"--grid: \"" + item + "\" is not a number"};
    out.push_back(v);
  }
  if (out.empty()) throw UsageError{"--grid: no values"};
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"omgm: coarse-to-fine multimodal retrieval for knowledge-based VQA"};
  app.set_version_flag("--version", std::string(omgm_version()));
  app.require_subcommand(1);

  Common common;
  std::string corpus, index, samples, out, cache, results, param, grid;
  std::size_t entities = 500, queries = 200, imageless = 0;
  double noise = 0.0;
  std::uint64_t bench_seed = 7;

  auto* ingest = app.add_subcommand("ingest", "validate a corpus and write a manifest");
  ingest->add_option("--corpus", corpus, "corpus JSONL")->required();
  ingest->add_option("--out", out, "validated corpus JSONL")->required();

  auto* summarize = app.add_subcommand("summarize", "generate entity summaries (cached)");
  summarize->add_option("--corpus", corpus, "corpus JSONL")->required();
  summarize->add_option("--cache", cache, "summary cache JSONL")->required();
  summarize->add_option("--out", out, "corpus JSONL with summaries")->required();

  auto* index_cmd = app.add_subcommand("index", "embed summaries and persist the index");
  index_cmd->add_option("--corpus", corpus, "corpus JSONL with summaries")->required();
  index_cmd->add_option("--out", out, "index file")->required();

  auto* query = app.add_subcommand("query", "run the retrieval pipeline over samples");
  query->add_option("--samples", samples, "samples JSONL")->required();
  query->add_option("--corpus", corpus, "corpus JSONL")->required();
  query->add_option("--index", index, "index file")->required();
  query->add_option("--out", out, "results JSONL")->required();

  auto* eval = app.add_subcommand("eval", "score a results file against gold samples");
  eval->add_option("--results", results, "results JSONL")->required();
  eval->add_option("--samples", samples, "gold samples JSONL")->required();
  eval->add_option("--out", out, "report JSON")->required();

  auto* sweep = app.add_subcommand("sweep", "evaluate over a parameter grid");
  sweep->add_option("--param", param, "alpha, beta or k")
      ->required()
      ->check(CLI::IsMember({"alpha", "beta", "k"}));
  sweep->add_option("--grid", grid, "comma-separated values")->required();
  sweep->add_option("--samples", samples, "samples JSONL")->required();
  sweep->add_option("--corpus", corpus, "corpus JSONL")->required();
  sweep->add_option("--index", index, "index file")->required();
  sweep->add_option("--out", out, "CSV path; JSON is written alongside")->required();

  auto* pairs = app.add_subcommand("export-pairs", "write contrastive training pairs");
  pairs->add_option("--samples", samples, "samples JSONL")->required();
  pairs->add_option("--corpus", corpus, "corpus JSONL")->required();
  pairs->add_option("--index", index, "index file")->required();
  pairs->add_option("--out", out, "pairs JSONL")->required();

  auto* synth = app.add_subcommand("synth", "write a planted synthetic benchmark");
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--entities", entities, "entity count");
  synth->add_option("--queries", queries, "sample count");
  synth->add_option("--imageless", imageless, "entities without a main image");
  synth->add_option("--noise", noise, "fraction of samples with a distractor image")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--bench-seed", bench_seed, "generator seed");

  for (auto* cmd : {ingest, summarize, index_cmd, query, eval, sweep, pairs, synth})
    add_common(cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  auto* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  try {
    Handle h;
    resolve_config(common, h);
    char* summary = nullptr;
    const auto needs_provider = name != "ingest" && name != "eval";
    if (needs_provider) make_provider(h);

    if (name == "ingest") {
      check_domain(omgm_ingest(corpus.c_str(), out.c_str(), h.config, &summary));
    } else if (name == "summarize") {
      check_domain(omgm_summarize(corpus.c_str(), cache.c_str(), out.c_str(), h.provider, h.config, &summary));
    } else if (name == "index") {
      check_domain(omgm_index_corpus(corpus.c_str(), out.c_str(), h.provider, h.config, &summary));
    } else if (name == "query") {
      check_domain(omgm_query(samples.c_str(), corpus.c_str(), index.c_str(), out.c_str(), h.provider,
                              h.config, &summary));
    } else if (name == "eval") {
      check_domain(omgm_evaluate(results.c_str(), samples.c_str(), out.c_str(), h.config, &summary));
    } else if (name == "sweep") {
      const auto values = parse_grid(grid);
      check_domain(omgm_sweep(param.c_str(), values.data(), values.size(), samples.c_str(),
                              corpus.c_str(), index.c_str(), out.c_str(), h.provider, h.config,
                              &summary));
    } else if (name == "export-pairs") {
      check_domain(omgm_export_pairs(samples.c_str(), corpus.c_str(), index.c_str(), out.c_str(),
                                     h.provider, h.config, &summary));
    } else if (name == "synth") {
      std::ostringstream options;
      options << "{\"entities\":" << entities << ",\"samples\":" << queries
              << ",\"imageless\":" << imageless << ",\"noise_fraction\":" << noise
              << ",\"seed\":" << bench_seed << "}";
      check_domain(omgm_synth_benchmark(options.str().c_str(), out.c_str(), h.provider, h.config,
                                        &summary));
    }
    print_summary(summary);
    return 0;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "omgm %s: usage error: %s\n", name.c_str(), e.message.c_str());
    return kExitUsage;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "omgm %s: error: %s\n", name.c_str(), e.message.c_str());
    return kExitDomain;
  }
}
