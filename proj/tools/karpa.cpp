#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "karpa/config.hpp"
#include "karpa/embedding.hpp"
#include "karpa/error.hpp"
#include "karpa/eval.hpp"
#include "karpa/kg_store.hpp"
#include "karpa/path_matcher.hpp"
#include "karpa/pipeline.hpp"
#include "karpa/text.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitProvider = 4;
constexpr int kExitOther = 1;

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> overrides;
};

karpa::PipelineConfig load_config(const GlobalOptions& g) {
  std::string path = g.config_path;
  if (path.empty()) {
    if (auto env = karpa::process_getenv("KARPA_CONFIG")) path = *env;
  }
  karpa::ConfigMap map;
  std::string base_dir = ".";
  if (!path.empty()) {
    map = karpa::ConfigMap::load_file(path);
    base_dir = std::filesystem::path(path).parent_path().string();
    if (base_dir.empty()) base_dir = ".";
  }
  map.apply_env(karpa::process_getenv);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw karpa::ConfigError("--set expects key=value, got: " + kv);
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    map.set(std::string(karpa::text::trim(key)), std::string(karpa::text::trim(value)));
  }
  return karpa::PipelineConfig::from_map(map, base_dir);
}

int exit_code_for(const karpa::Error& e) {
  switch (e.kind()) {
    case karpa::ErrorKind::kConfig: return kExitConfig;
    case karpa::ErrorKind::kData: return kExitData;
    case karpa::ErrorKind::kProvider: return kExitProvider;
    default: return kExitOther;
  }
}

int cmd_ingest(const std::string& tsv, const std::string& dump_path) {
  auto graph = karpa::load_triples_file(tsv);
  nlohmann::json stats = {{"entities", graph.entity_count()},
                          {"relations", graph.relation_count()},
                          {"triples", graph.triple_count()}};
  std::cout << stats.dump() << '\n';
  if (!dump_path.empty()) {
    std::ofstream out(dump_path, std::ios::trunc);
    if (!out) throw karpa::DataError("cannot write " + dump_path);
    graph.dump(out);
  }
  return kExitOk;
}

int cmd_ask(const GlobalOptions& g, const std::string& question, const std::vector<std::string>& topics,
            const std::string& trace_path) {
  auto rt = karpa::PipelineRuntime::create(load_config(g));
  karpa::UsageLedger ledger;
  auto trace = rt->pipeline->run({"ask", question, topics}, &ledger);
  if (!trace_path.empty()) {
    std::ofstream out(trace_path, std::ios::trunc);
    if (!out) throw karpa::DataError("cannot write " + trace_path);
    out << trace.to_json(rt->graph).dump() << '\n';
  }
  nlohmann::json result = {{"answers", trace.answers().surfaces(false)},
                           {"grounded", trace.answers().surfaces(true)},
                           {"no_answer_marker", trace.answers().no_answer_marker},
                           {"fallback_initial", trace.fallback_initial},
                           {"usage", karpa::to_json(ledger.snapshot())}};
  if (trace.error) result["error"] = *trace.error;
  std::cout << result.dump() << '\n';
  return trace.error ? kExitData : kExitOk;
}

struct EvalArgs {
  std::string dataset;
  std::string format = "simple";
  std::string report;
  std::string summary;
  std::optional<std::size_t> concurrency;
  std::optional<std::string> mode;
  std::optional<std::size_t> limit;
};

int cmd_eval(const GlobalOptions& g, const EvalArgs& a) {
  auto config = load_config(g);
  auto samples = karpa::load_dataset(a.dataset, karpa::parse_dataset_format(a.format));
  if (a.limit && *a.limit < samples.size()) samples.resize(*a.limit);
  auto rt = karpa::PipelineRuntime::create(config);

  karpa::EvalOptions options;
  options.mode = config.eval_mode;
  if (a.mode) {
    if (*a.mode == "strict") options.mode = karpa::ScoreMode::kStrict;
    else if (*a.mode == "lenient") options.mode = karpa::ScoreMode::kLenient;
    else throw karpa::ConfigError("unknown eval mode: " + *a.mode);
  }
  options.concurrency = a.concurrency.value_or(config.eval_concurrency);
  options.checkpoint_dir = config.checkpoint_dir;
  options.config_digest = config.digest();

  auto report = karpa::evaluate(samples, *rt->pipeline, options);
  if (a.report.empty()) {
    report.write(std::cout);
  } else {
    std::ofstream out(a.report, std::ios::trunc);
    if (!out) throw karpa::DataError("cannot write " + a.report);
    report.write(out);
  }
  if (!a.summary.empty()) {
    std::ofstream out(a.summary, std::ios::trunc);
    if (!out) throw karpa::DataError("cannot write " + a.summary);
    report.write_summary_tsv(out);
  } else if (!a.report.empty()) {
    report.write_summary_tsv(std::cout);
  }
  return kExitOk;
}

struct MatchArgs {
  std::string topic;
  std::string path;
  std::optional<std::string> strategy;
  std::optional<std::size_t> top_k;
};

int cmd_match(const GlobalOptions& g, const MatchArgs& a) {
  auto config = load_config(g);
  if (config.kg_path.empty()) throw karpa::ConfigError("kg.path is not set");
  if (auto key = karpa::process_getenv("KARPA_EMBED_API_KEY")) config.embedding.api_key = *key;
  auto graph = karpa::load_triples_file(config.kg_path);
  karpa::EmbeddingGateway embeddings(karpa::make_embedding_provider(config.embedding), config.retry);
  if (!config.embedding.cache_path.empty()) embeddings.attach_cache_file(config.embedding.cache_path);

  auto cfg = config.matcher;
  if (a.strategy) cfg.strategy = karpa::parse_strategy(*a.strategy);
  if (a.top_k) cfg.top_k = *a.top_k;
  karpa::RelationPath candidate;
  for (const auto& r : karpa::text::split(a.path, ',')) {
    const auto label = karpa::text::trim(r);
    if (!label.empty()) candidate.relations.emplace_back(label);
  }
  if (candidate.relations.empty()) throw karpa::ConfigError("--path needs at least one relation");

  karpa::PathMatcher matcher(graph, embeddings);
  const karpa::EntityId start = graph.entity(a.topic);
  const std::vector<karpa::EntityId> starts{start};
  const std::vector<karpa::RelationPath> candidates{candidate};
  karpa::write_match_report(std::cout, graph, matcher.match_all(starts, candidates, cfg));
  return kExitOk;
}

int cmd_cache(const GlobalOptions& g, const std::string& action) {
  auto config = load_config(g);
  if (config.embedding.cache_path.empty()) throw karpa::ConfigError("embedding.cache is not set");
  if (action == "stats") {
    const auto stats = karpa::embedding_cache_stats(config.embedding.cache_path);
    const std::map<std::string, std::size_t> per_identity(stats.per_identity.begin(), stats.per_identity.end());
    std::cout << nlohmann::json{{"path", config.embedding.cache_path},
                                {"records", stats.records},
                                {"per_identity", per_identity}}.dump()
              << '\n';
  } else {
    karpa::clear_embedding_cache(config.embedding.cache_path);
    std::cout << "{\"cleared\":true}\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph question answering with LLM path planning"};
  app.require_subcommand(1);
  GlobalOptions global;
  app.add_option("--config", global.config_path, "Config file (default: $KARPA_CONFIG)");
  app.add_option("--set", global.overrides, "Override a config key, key=value (repeatable)");

  std::string ingest_path;
  std::string ingest_dump;
  auto* ingest = app.add_subcommand("ingest", "Load a triple TSV and report its size");
  ingest->add_option("tsv", ingest_path, "Tab-separated head/relation/tail file")->required();
  ingest->add_option("--dump", ingest_dump, "Write the normalized triple list here");

  std::string question;
  std::vector<std::string> topics;
  std::string trace_path;
  auto* ask = app.add_subcommand("ask", "Answer one question");
  ask->add_option("--question,-q", question)->required();
  ask->add_option("--topic,-t", topics, "Topic entity label (repeatable)")->required();
  ask->add_option("--trace", trace_path, "Write the full trace as JSON");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a dataset");
  eval->add_option("--dataset,-d", eval_args.dataset)->required();
  eval->add_option("--format,-f", eval_args.format)->check(CLI::IsMember({"webqsp", "cwq", "simple"}));
  eval->add_option("--report,-o", eval_args.report, "Report path (default: stdout)");
  eval->add_option("--summary", eval_args.summary, "TSV summary path");
  eval->add_option("--concurrency,-j", eval_args.concurrency);
  eval->add_option("--mode", eval_args.mode)->check(CLI::IsMember({"strict", "lenient"}));
  eval->add_option("--limit", eval_args.limit, "Evaluate only the first N samples");

  MatchArgs match_args;
  auto* match = app.add_subcommand("match", "Match one relation path against the graph");
  match->add_option("--topic,-t", match_args.topic)->required();
  match->add_option("--path,-p", match_args.path, "Comma-separated relation labels")->required();
  match->add_option("--strategy,-s", match_args.strategy)
      ->check(CLI::IsMember({"beam", "pathfind", "dijkstra", "heuristic"}));
  match->add_option("--top-k,-k", match_args.top_k);

  std::string cache_action;
  auto* cache = app.add_subcommand("cache", "Inspect or clear the embedding cache");
  cache->add_option("action", cache_action)->required()->check(CLI::IsMember({"stats", "clear"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_path, ingest_dump);
    if (*ask) return cmd_ask(global, question, topics, trace_path);
    if (*eval) return cmd_eval(global, eval_args);
    if (*match) return cmd_match(global, match_args);
    if (*cache) return cmd_cache(global, cache_action);
  } catch (const karpa::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOk;
}
