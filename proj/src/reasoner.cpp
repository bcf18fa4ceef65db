#include "karpa/reasoner.hpp"

#include <algorithm>
#include <exception>
#include <set>

#include "karpa/error.hpp"
#include "karpa/text.hpp"

namespace karpa {

bool AnswerSet::add(Answer answer) {
  if (answer.normalized.empty()) answer.normalized = text::normalize_answer(answer.surface);
  if (answer.normalized.empty()) return false;
  const auto dup = std::any_of(answers_.begin(), answers_.end(),
                               [&](const Answer& a) { return a.normalized == answer.normalized; });
  if (dup) return false;
  answers_.push_back(std::move(answer));
  return true;
}

bool AnswerSet::contains(std::string_view surface) const {
  const auto key = text::normalize_answer(surface);
  return std::any_of(answers_.begin(), answers_.end(),
                     [&](const Answer& a) { return a.normalized == key; });
}

std::vector<std::string> AnswerSet::surfaces(bool grounded_only) const {
  std::vector<std::string> out;
  for (const auto& a : answers_) {
    if (!grounded_only || a.grounded) out.push_back(a.surface);
  }
  return out;
}

AnswerSet parse_answers(const std::string& llm_text) {
  AnswerSet set;
  const auto close = llm_text.rfind('}');
  const auto open = close == std::string::npos ? std::string::npos : llm_text.rfind('{', close);
  if (open == std::string::npos) {
    set.no_answer_marker = true;
    return set;
  }
  for (const auto& item : text::split(std::string_view(llm_text).substr(open + 1, close - open - 1), ',')) {
    auto trimmed = text::trim(item);
    if (!trimmed.empty()) set.add({std::string(trimmed), {}, 0, true});
  }
  return set;
}

std::string render_answers(const AnswerSet& answers) {
  return "{" + text::join(answers.surfaces(), ", ") + "}";
}

std::string render_reasoning_path(const KnowledgeGraph& graph, const ScoredPath& path) {
  return "(" + graph.entity_label(path.path.start) + ", " + path.relation_path.joined(" → ") +
         ", " + graph.entity_label(path.path.tail()) + ")";
}

std::vector<ChatMessage> build_reasoning_prompt(const Query& q, const KnowledgeGraph& graph,
                                                const std::vector<ScoredPath>& paths,
                                                std::size_t batch_limit,
                                                const PromptTemplates& tpl) {
  if (paths.empty() || paths.size() > batch_limit) {
    throw ContractError("build_reasoning_prompt: expected 1.." + std::to_string(batch_limit) +
                        " paths, got " + std::to_string(paths.size()));
  }
  std::vector<std::string> lines;
  lines.reserve(paths.size());
  for (const auto& p : paths) lines.push_back("    " + render_reasoning_path(graph, p));
  return {{Role::kUser, render_template(tpl.reasoning, {{"question", q.question},
                                                        {"reasoning_paths", text::join(lines, "\n")}})}};
}

ReasoningOutcome answer_question(const Query& q, const KnowledgeGraph& graph,
                                 const std::vector<ScoredPath>& matched, LlmGateway& llm,
                                 UsageLedger* ledger, std::size_t batch_limit,
                                 const PromptTemplates& tpl) {
  if (batch_limit == 0) throw ContractError("answer_question: batch_limit must be >= 1");
  ReasoningOutcome outcome;
  if (matched.empty()) return outcome;

  std::set<std::string> tails;
  for (const auto& p : matched) tails.insert(text::normalize_answer(graph.entity_label(p.path.tail())));

  std::exception_ptr last_error;
  for (std::size_t first = 0; first < matched.size(); first += batch_limit) {
    const auto count = std::min(batch_limit, matched.size() - first);
    std::vector<ScoredPath> slice(matched.begin() + static_cast<std::ptrdiff_t>(first),
                                  matched.begin() + static_cast<std::ptrdiff_t>(first + count));
    ReasoningBatch batch;
    batch.first_path = first;
    batch.path_count = count;
    const auto messages = build_reasoning_prompt(q, graph, slice, batch_limit, tpl);
    batch.prompt_digest = message_digest(messages);
    try {
      const auto result = llm.complete(messages, Phase::kReasoning, ledger);
      batch.raw_text = result.text;
      auto parsed = parse_answers(result.text);
      batch.no_answer_marker = parsed.no_answer_marker;
      for (auto a : parsed.answers()) {
        batch.parsed.push_back(a.surface);
        a.batch = outcome.batches.size();
        a.grounded = tails.count(a.normalized) > 0;
        outcome.answers.add(std::move(a));
      }
    } catch (const Error& e) {
      batch.error = e.what();
      last_error = std::current_exception();
    }
    outcome.batches.push_back(std::move(batch));
  }
  const bool all_failed = std::all_of(outcome.batches.begin(), outcome.batches.end(),
                                      [](const ReasoningBatch& b) { return b.error.has_value(); });
  if (all_failed && last_error) std::rethrow_exception(last_error);
  outcome.answers.no_answer_marker =
      std::all_of(outcome.batches.begin(), outcome.batches.end(),
                  [](const ReasoningBatch& b) { return b.no_answer_marker || b.error; });
  return outcome;
}

}  // namespace karpa
