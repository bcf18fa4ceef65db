#pragma once

#include <optional>
#include <string>
#include <vector>

#include "karpa/kg_store.hpp"
#include "karpa/llm.hpp"
#include "karpa/path_matcher.hpp"
#include "karpa/planner.hpp"
#include "karpa/prompts.hpp"

namespace karpa {

struct Answer {
  std::string surface;     // as written by the model
  std::string normalized;  // comparison key
  std::size_t batch = 0;   // reasoning batch that produced it
  bool grounded = true;    // equals the tail entity of a supplied path
};

class AnswerSet {
 public:
  // Adds unless an answer with the same normalized form exists.
  bool add(Answer answer);
  const std::vector<Answer>& answers() const noexcept { return answers_; }
  std::size_t size() const noexcept { return answers_.size(); }
  bool empty() const noexcept { return answers_.empty(); }
  bool contains(std::string_view surface) const;
  std::vector<std::string> surfaces(bool grounded_only = false) const;

  // No `{...}` group was found in the model output.
  bool no_answer_marker = false;

 private:
  std::vector<Answer> answers_;
};

// Last {...} group, split on commas, trimmed, empties dropped, deduplicated.
AnswerSet parse_answers(const std::string& llm_text);
// "{a, b}" in insertion order.
std::string render_answers(const AnswerSet& answers);

inline constexpr std::size_t kDefaultBatchLimit = 8;

// "(start, r1 → r2, tail)".
std::string render_reasoning_path(const KnowledgeGraph& graph, const ScoredPath& path);

std::vector<ChatMessage> build_reasoning_prompt(
    const Query& q, const KnowledgeGraph& graph, const std::vector<ScoredPath>& paths,
    std::size_t batch_limit = kDefaultBatchLimit,
    const PromptTemplates& tpl = PromptTemplates::defaults());

struct ReasoningBatch {
  std::size_t first_path = 0;
  std::size_t path_count = 0;
  std::string prompt_digest;
  std::string raw_text;
  std::optional<std::string> error;
  std::vector<std::string> parsed;
  bool no_answer_marker = false;
};

struct ReasoningOutcome {
  AnswerSet answers;
  std::vector<ReasoningBatch> batches;
};

// Splits score-ordered paths into consecutive batches of at most
// `batch_limit`, runs one completion per batch and unions the answers.
// Answers that match no supplied tail entity are kept and flagged
// ungrounded. Failed batches are recorded; if every batch fails the last
// error is rethrown.
ReasoningOutcome answer_question(const Query& q, const KnowledgeGraph& graph,
                                 const std::vector<ScoredPath>& matched, LlmGateway& llm,
                                 UsageLedger* ledger, std::size_t batch_limit = kDefaultBatchLimit,
                                 const PromptTemplates& tpl = PromptTemplates::defaults());

}  // namespace karpa
