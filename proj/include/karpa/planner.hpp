#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "karpa/embedding.hpp"
#include "karpa/llm.hpp"
#include "karpa/path_matcher.hpp"
#include "karpa/prompts.hpp"

namespace karpa {

struct Query {
  std::string id;
  std::string question;
  std::vector<std::string> topic_entities;
};

// LLM-proposed relation paths keyed by their length.
struct CandidatePathSet {
  std::map<std::size_t, std::vector<RelationPath>> by_length;
  std::string raw_llm_text;
  // A path's relation count disagreed with the length its sentence stated;
  // the path is filed under its actual length.
  bool inconsistent = false;
  // A path longer than the prompted maximum was proposed.
  bool overlong = false;

  bool empty() const;
  std::vector<RelationPath> all() const;
  // Distinct relation labels in order of first appearance, shortest paths first.
  std::vector<std::string> distinct_relations() const;
};

// Finds each "Length L" sentence and takes the last {...} group in it.
// `{}` and "None" give an empty list. Throws ParseError (line 0, message
// carrying the raw text) when the text has no brace group at all.
CandidatePathSet parse_path_sets(const std::string& llm_text);

// Renders a set with at most one path per length in the exemplar answer
// format; parse_path_sets inverts it.
std::string render_path_sets(const CandidatePathSet& set, std::size_t max_length = 3);

struct RelationPool {
  // Initial relation -> its ranked vocabulary neighbours.
  std::vector<std::pair<std::string, std::vector<ScoredLabel>>> per_source;
  std::vector<std::string> pool;
};

inline constexpr std::size_t kDefaultRelationCap = 30;

// floor(cap / distinct initial relations), at least 3.
std::size_t default_per_relation_k(std::size_t distinct_relations, std::size_t cap);

// Top-k vocabulary labels per initial relation, merged round-robin by rank,
// deduplicated and truncated to `cap`.
RelationPool extract_relation_pool(const CandidatePathSet& initial,
                                   const std::vector<std::string>& vocab,
                                   EmbeddingGateway& gateway,
                                   std::optional<std::size_t> per_relation_k,
                                   std::size_t cap = kDefaultRelationCap);

std::vector<ChatMessage> build_initial_prompt(const Query& q,
                                              const PromptTemplates& tpl = PromptTemplates::defaults());
std::vector<ChatMessage> build_replanning_prompt(
    const Query& q, const RelationPool& pool,
    const PromptTemplates& tpl = PromptTemplates::defaults());

struct RelationSnap {
  std::string original;
  std::string snapped;
  double score;
};

struct PlanningStep {
  CandidatePathSet paths;
  std::vector<std::string> prompt_digests;  // one per completion, retries included
  std::vector<RelationSnap> snaps;          // re-planning only
};

// One completion parsed with parse_path_sets; on a parse failure the request
// is repeated once with a corrective user turn, then the ParseError escapes.
PlanningStep plan_initial(const Query& q, LlmGateway& llm, UsageLedger* ledger,
                          const PromptTemplates& tpl = PromptTemplates::defaults());

// Re-planning completion; labels outside the vocabulary are snapped to their
// nearest vocabulary label by cosine. An `~inv` suffix is kept when its base
// label is in the vocabulary.
PlanningStep replan(const Query& q, const RelationPool& pool,
                    const std::vector<std::string>& vocab, LlmGateway& llm,
                    EmbeddingGateway& embeddings, UsageLedger* ledger,
                    const PromptTemplates& tpl = PromptTemplates::defaults());

// Appended after an unparseable planning answer.
extern const char* const kPlanningFormatReminder;

}  // namespace karpa
