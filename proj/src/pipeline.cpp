#include "karpa/pipeline.hpp"

#include "karpa/error.hpp"

namespace karpa {

namespace {

nlohmann::json paths_json(const CandidatePathSet& set) {
  nlohmann::json by_length = nlohmann::json::object();
  for (const auto& [len, paths] : set.by_length) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : paths) arr.push_back(p.relations);
    by_length[std::to_string(len)] = arr;
  }
  return by_length;
}

nlohmann::json planning_json(const PlanningStep& step) {
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& s : step.snaps) {
    snaps.push_back({{"original", s.original}, {"snapped", s.snapped}, {"score", s.score}});
  }
  return {{"prompt_digests", step.prompt_digests},
          {"raw", step.paths.raw_llm_text},
          {"paths", paths_json(step.paths)},
          {"inconsistent", step.paths.inconsistent},
          {"overlong", step.paths.overlong},
          {"snaps", snaps}};
}

}  // namespace

nlohmann::json to_json(const UsageSnapshot& usage) {
  const auto counts = [](const UsageCounts& c) {
    return nlohmann::json{{"calls", c.calls},
                          {"prompt_tokens", c.prompt_tokens},
                          {"completion_tokens", c.completion_tokens},
                          {"estimated_calls", c.estimated_calls}};
  };
  nlohmann::json phases = nlohmann::json::object();
  for (std::size_t i = 0; i < kPhaseCount; ++i) {
    phases[to_string(static_cast<Phase>(i))] = counts(usage.by_phase[i]);
  }
  auto out = counts(usage.total);
  out["by_phase"] = phases;
  return out;
}

nlohmann::json to_json(const KnowledgeGraph& graph, const ScoredPath& path) {
  nlohmann::json entities = nlohmann::json::array();
  for (EntityId e : path.path.entities()) entities.push_back(graph.entity_label(e));
  return {{"score", path.score},
          {"cost", path.cost},
          {"relations", path.relation_path.relations},
          {"entities", entities}};
}

nlohmann::json QuestionTrace::to_json(const KnowledgeGraph& graph) const {
  nlohmann::json j;
  j["id"] = query.id;
  j["question"] = query.question;
  j["topic_entities"] = query.topic_entities;
  j["resolved_topics"] = resolved_topics;
  j["unresolved_topics"] = unresolved_topics;
  j["initial"] = initial ? planning_json(*initial) : nlohmann::json();
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& [source, ranked] : pool.per_source) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& s : ranked) r.push_back({s.label, s.score});
    sources.push_back({{"relation", source}, {"similar", r}});
  }
  j["relation_pool"] = {{"per_source", sources}, {"pool", pool.pool}};
  j["replanned"] = replanned ? planning_json(*replanned) : nlohmann::json();
  j["fallback_initial"] = fallback_initial;
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : candidates) cands.push_back(c.relations);
  j["candidates"] = cands;
  nlohmann::json matched_paths = nlohmann::json::array();
  for (const auto& p : matched.paths) matched_paths.push_back(karpa::to_json(graph, p));
  j["matched"] = {{"truncated", matched.truncated}, {"paths", matched_paths}};
  nlohmann::json batches = nlohmann::json::array();
  for (const auto& b : reasoning.batches) {
    batches.push_back({{"first_path", b.first_path},
                       {"path_count", b.path_count},
                       {"prompt_digest", b.prompt_digest},
                       {"raw", b.raw_text},
                       {"parsed", b.parsed},
                       {"no_answer_marker", b.no_answer_marker},
                       {"error", b.error ? nlohmann::json(*b.error) : nlohmann::json()}});
  }
  j["reasoning"] = batches;
  nlohmann::json answers = nlohmann::json::array();
  for (const auto& a : reasoning.answers.answers()) {
    answers.push_back({{"answer", a.surface}, {"batch", a.batch}, {"grounded", a.grounded}});
  }
  j["answers"] = answers;
  j["no_answer_marker"] = reasoning.answers.no_answer_marker;
  j["error"] = error ? nlohmann::json(*error) : nlohmann::json();
  j["usage"] = karpa::to_json(usage);
  return j;
}

Pipeline::Pipeline(const KnowledgeGraph& graph, EmbeddingGateway& embeddings, LlmGateway& llm,
                   PipelineOptions options, PromptTemplates templates)
    : graph_(graph),
      embeddings_(embeddings),
      llm_(llm),
      options_(std::move(options)),
      templates_(std::move(templates)),
      vocab_(graph.relation_vocabulary()) {
  options_.matcher.validate();
  if (options_.batch_limit == 0) throw ContractError("batch_limit must be >= 1");
}

QuestionTrace Pipeline::run(const Query& q, UsageLedger* ledger) const {
  UsageLedger local;
  struct MergeUsage {
    const UsageLedger& from;
    UsageLedger* to;
    ~MergeUsage() {
      if (to) to->merge(from.snapshot());
    }
  } merge_usage{local, ledger};
  QuestionTrace trace;
  trace.query = q;

  std::vector<EntityId> starts;
  for (const auto& label : q.topic_entities) {
    if (auto id = graph_.find_entity(label)) {
      starts.push_back(*id);
      trace.resolved_topics.push_back(label);
    } else {
      trace.unresolved_topics.push_back(label);
    }
  }
  if (starts.empty()) {
    trace.error = "topic entity not found in graph";
    return trace;
  }

  // Pre-planning.
  trace.initial = plan_initial(q, llm_, &local, templates_);
  if (!vocab_.empty()) {
    trace.pool = extract_relation_pool(trace.initial->paths, vocab_, embeddings_,
                                       options_.per_relation_k, options_.relation_cap);
  }
  if (!trace.pool.pool.empty()) {
    trace.replanned = replan(q, trace.pool, vocab_, llm_, embeddings_, &local, templates_);
    trace.candidates = trace.replanned->paths.all();
  }
  if (trace.candidates.empty()) {
    trace.fallback_initial = true;
    trace.candidates = trace.initial->paths.all();
  }

  // Matching.
  if (!trace.candidates.empty()) {
    PathMatcher matcher(graph_, embeddings_);
    trace.matched = matcher.match_all(starts, trace.candidates, options_.matcher);
  }

  // Reasoning.
  trace.reasoning = answer_question(q, graph_, trace.matched.paths, llm_, &local,
                                    options_.batch_limit, templates_);
  trace.usage = local.snapshot();
  return trace;
}

std::shared_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingSettings& s) {
  if (s.kind == "mock") return std::make_shared<MockEmbeddingProvider>(s.dim);
  if (s.kind == "http") return std::make_shared<HttpEmbeddingProvider>(s.endpoint, s.model, s.api_key);
  throw ConfigError("unknown embedding provider kind: " + s.kind);
}

std::shared_ptr<LlmProvider> make_llm_provider(const LlmSettings& s) {
  if (s.kind == "scripted") {
    return std::make_shared<ScriptedLlmProvider>(ScriptedLlmProvider::from_file(s.fixtures));
  }
  if (s.kind == "http") return std::make_shared<HttpChatProvider>(s.endpoint, s.api_key);
  throw ConfigError("unknown llm provider kind: " + s.kind);
}

std::unique_ptr<PipelineRuntime> PipelineRuntime::create(const PipelineConfig& config) {
  auto rt = std::make_unique<PipelineRuntime>();
  rt->config = config;
  if (rt->config.kg_path.empty()) throw ConfigError("kg.path is not set");
  if (auto key = process_getenv("KARPA_LLM_API_KEY")) rt->config.llm.api_key = *key;
  if (auto key = process_getenv("KARPA_EMBED_API_KEY")) rt->config.embedding.api_key = *key;

  rt->graph = load_triples_file(rt->config.kg_path);
  rt->embeddings = std::make_unique<EmbeddingGateway>(make_embedding_provider(rt->config.embedding),
                                                      rt->config.retry);
  if (!rt->config.embedding.cache_path.empty()) {
    rt->embeddings->attach_cache_file(rt->config.embedding.cache_path);
  }
  CompletionParams params{rt->config.llm.model, rt->config.llm.temperature, rt->config.llm.max_output};
  rt->llm = std::make_unique<LlmGateway>(make_llm_provider(rt->config.llm), params, rt->config.retry);
  PipelineOptions options{rt->config.matcher, rt->config.relation_cap, rt->config.per_relation_k,
                          rt->config.batch_limit};
  auto templates = rt->config.prompts_dir.empty() ? PromptTemplates::defaults()
                                                  : PromptTemplates::load(rt->config.prompts_dir);
  rt->pipeline = std::make_unique<Pipeline>(rt->graph, *rt->embeddings, *rt->llm, options, templates);
  return rt;
}

}  // namespace karpa
