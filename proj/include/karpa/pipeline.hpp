#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "karpa/config.hpp"
#include "karpa/embedding.hpp"
#include "karpa/kg_store.hpp"
#include "karpa/llm.hpp"
#include "karpa/path_matcher.hpp"
#include "karpa/planner.hpp"
#include "karpa/prompts.hpp"
#include "karpa/reasoner.hpp"

namespace karpa {

struct PipelineOptions {
  MatchConfig matcher;
  std::size_t relation_cap = kDefaultRelationCap;
  std::optional<std::size_t> per_relation_k;
  std::size_t batch_limit = kDefaultBatchLimit;
};

// Everything recorded while answering one question.
struct QuestionTrace {
  Query query;
  std::vector<std::string> resolved_topics;
  std::vector<std::string> unresolved_topics;
  std::optional<PlanningStep> initial;
  RelationPool pool;
  std::optional<PlanningStep> replanned;
  bool fallback_initial = false;
  std::vector<RelationPath> candidates;
  MatchResult matched;
  ReasoningOutcome reasoning;
  std::optional<std::string> error;
  UsageSnapshot usage;

  const AnswerSet& answers() const noexcept { return reasoning.answers; }
  nlohmann::json to_json(const KnowledgeGraph& graph) const;
};

// Pre-planning, matching and reasoning for one question at a time. Safe to
// share across threads when the gateways are.
class Pipeline {
 public:
  Pipeline(const KnowledgeGraph& graph, EmbeddingGateway& embeddings, LlmGateway& llm,
           PipelineOptions options, PromptTemplates templates = PromptTemplates::defaults());

  // Unresolvable topic entities are recorded in the trace and yield an empty
  // answer. Provider and parse failures propagate.
  QuestionTrace run(const Query& q, UsageLedger* ledger = nullptr) const;

  const KnowledgeGraph& graph() const noexcept { return graph_; }
  const PipelineOptions& options() const noexcept { return options_; }

 private:
  const KnowledgeGraph& graph_;
  EmbeddingGateway& embeddings_;
  LlmGateway& llm_;
  PipelineOptions options_;
  PromptTemplates templates_;
  std::vector<std::string> vocab_;
};

// Graph, gateways and pipeline built from a PipelineConfig.
struct PipelineRuntime {
  PipelineConfig config;
  KnowledgeGraph graph;
  std::unique_ptr<EmbeddingGateway> embeddings;
  std::unique_ptr<LlmGateway> llm;
  std::unique_ptr<Pipeline> pipeline;

  // API keys come from KARPA_LLM_API_KEY / KARPA_EMBED_API_KEY.
  static std::unique_ptr<PipelineRuntime> create(const PipelineConfig& config);
};

std::shared_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingSettings& settings);
std::shared_ptr<LlmProvider> make_llm_provider(const LlmSettings& settings);

nlohmann::json to_json(const UsageSnapshot& usage);
nlohmann::json to_json(const KnowledgeGraph& graph, const ScoredPath& path);

}  // namespace karpa
