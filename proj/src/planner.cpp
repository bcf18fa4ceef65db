#include "karpa/planner.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

#include "karpa/error.hpp"
#include "karpa/kg_store.hpp"
#include "karpa/text.hpp"

namespace karpa {

const char* const kPlanningFormatReminder =
    "Your previous answer could not be parsed. Please answer again. For each length 1, 2 and 3 "
    "write one line starting with \"Length L reasoning path:\" that ends with the relations of "
    "the path in curly braces, for example {relation_1, relation_2}, or None: {} if no such "
    "path exists.";

bool CandidatePathSet::empty() const {
  return std::all_of(by_length.begin(), by_length.end(),
                     [](const auto& kv) { return kv.second.empty(); });
}

std::vector<RelationPath> CandidatePathSet::all() const {
  std::vector<RelationPath> out;
  for (const auto& [_, paths] : by_length) out.insert(out.end(), paths.begin(), paths.end());
  return out;
}

std::vector<std::string> CandidatePathSet::distinct_relations() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& p : all()) {
    for (const auto& r : p.relations) {
      if (seen.insert(r).second) out.push_back(r);
    }
  }
  return out;
}

namespace {

struct BraceGroup {
  std::size_t open;
  std::string content;
};

std::vector<BraceGroup> brace_groups(const std::string& text, std::size_t begin, std::size_t end) {
  std::vector<BraceGroup> groups;
  std::size_t pos = begin;
  while (pos < end) {
    const auto close = text.find('}', pos);
    if (close == std::string::npos || close >= end) break;
    const auto open = text.rfind('{', close);
    if (open != std::string::npos && open >= pos) {
      groups.push_back({open, text.substr(open + 1, close - open - 1)});
    }
    pos = close + 1;
  }
  return groups;
}

std::string strip_relation(std::string_view item) {
  auto s = text::trim(item);
  while (!s.empty() && (s.front() == '"' || s.front() == '\'' || s.front() == '`')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == '"' || s.back() == '\'' || s.back() == '`' || s.back() == '.')) {
    s.remove_suffix(1);
  }
  return std::string(text::trim(s));
}

std::optional<RelationPath> group_to_path(const std::string& content) {
  const auto trimmed = text::trim(content);
  if (trimmed.empty() || text::to_lower(trimmed) == "none") return std::nullopt;
  RelationPath path;
  for (const auto& item : text::split(trimmed, ',')) {
    auto r = strip_relation(item);
    if (!r.empty()) path.relations.push_back(std::move(r));
  }
  if (path.relations.empty()) return std::nullopt;
  return path;
}

void file_path(CandidatePathSet& set, std::size_t stated, RelationPath path) {
  if (path.size() != stated) set.inconsistent = true;
  if (path.size() > 3) set.overlong = true;
  auto& bucket = set.by_length[path.size()];
  if (std::find(bucket.begin(), bucket.end(), path) == bucket.end()) bucket.push_back(std::move(path));
}

struct Marker {
  std::size_t pos;
  std::size_t length;
};

std::vector<Marker> find_markers(const std::string& text, bool line_start_only) {
  static const std::regex kAnywhere(R"(length\s*(\d+))", std::regex::icase);
  static const std::regex kLineStart(R"((^|\n)[ \t>*#\-]*length\s*(\d+))", std::regex::icase);
  std::vector<Marker> out;
  const auto& re = line_start_only ? kLineStart : kAnywhere;
  const std::size_t group = line_start_only ? 2 : 1;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    const auto n = std::stoul((*it)[group].str());
    if (!out.empty() && out.back().length == n) continue;  // same sentence group
    out.push_back({static_cast<std::size_t>(it->position(0)), n});
  }
  return out;
}

}  // namespace

CandidatePathSet parse_path_sets(const std::string& llm_text) {
  CandidatePathSet set;
  set.raw_llm_text = llm_text;
  for (std::size_t l = 1; l <= 3; ++l) set.by_length[l];

  if (brace_groups(llm_text, 0, llm_text.size()).empty()) {
    throw ParseError("no {...} path group in planner output: " + llm_text, 0);
  }

  auto markers = find_markers(llm_text, true);
  if (markers.empty()) markers = find_markers(llm_text, false);
  if (markers.empty()) {
    // Unlabelled answer: every group is a path filed by its own size.
    for (const auto& g : brace_groups(llm_text, 0, llm_text.size())) {
      if (auto p = group_to_path(g.content)) file_path(set, p->size(), std::move(*p));
    }
    set.inconsistent = true;
    return set;
  }
  for (std::size_t i = 0; i < markers.size(); ++i) {
    const auto end = i + 1 < markers.size() ? markers[i + 1].pos : llm_text.size();
    const auto groups = brace_groups(llm_text, markers[i].pos, end);
    if (groups.empty()) continue;
    if (auto p = group_to_path(groups.back().content)) {
      file_path(set, markers[i].length, std::move(*p));
    }
  }
  return set;
}

std::string render_path_sets(const CandidatePathSet& set, std::size_t max_length) {
  std::string out;
  for (std::size_t l = 1; l <= max_length; ++l) {
    out += "Length " + std::to_string(l) + " reasoning path: ";
    auto it = set.by_length.find(l);
    if (it == set.by_length.end() || it->second.empty()) {
      out += "No path of this length is needed, so the length " + std::to_string(l) +
             " reasoning path is None: {}.\n";
      continue;
    }
    if (it->second.size() > 1) {
      throw ContractError("render_path_sets: more than one path of length " + std::to_string(l));
    }
    out += "The answer entity may be reached through the relations below. So the length " +
           std::to_string(l) + " reasoning path is: {" + it->second.front().joined(", ") + "}.\n";
  }
  return out;
}

std::size_t default_per_relation_k(std::size_t distinct_relations, std::size_t cap) {
  if (distinct_relations == 0) return 3;
  return std::max<std::size_t>(3, cap / distinct_relations);
}

RelationPool extract_relation_pool(const CandidatePathSet& initial,
                                   const std::vector<std::string>& vocab,
                                   EmbeddingGateway& gateway,
                                   std::optional<std::size_t> per_relation_k, std::size_t cap) {
  RelationPool pool;
  const auto sources = initial.distinct_relations();
  if (sources.empty() || cap == 0) return pool;
  if (vocab.empty()) throw ContractError("extract_relation_pool: empty vocabulary");
  const std::size_t k = per_relation_k.value_or(default_per_relation_k(sources.size(), cap));
  for (const auto& r : sources) pool.per_source.emplace_back(r, top_k_similar_relations(gateway, r, vocab, k));

  std::set<std::string> seen;
  for (std::size_t rank = 0; pool.pool.size() < cap; ++rank) {
    bool any = false;
    for (const auto& [_, ranked] : pool.per_source) {
      if (rank >= ranked.size()) continue;
      any = true;
      if (seen.insert(ranked[rank].label).second) {
        pool.pool.push_back(ranked[rank].label);
        if (pool.pool.size() == cap) break;
      }
    }
    if (!any) break;
  }
  return pool;
}

std::vector<ChatMessage> build_initial_prompt(const Query& q, const PromptTemplates& tpl) {
  return {{Role::kUser, render_template(tpl.initial_planning,
                                        {{"question", q.question},
                                         {"topic_entities", text::join(q.topic_entities, ", ")}})}};
}

std::vector<ChatMessage> build_replanning_prompt(const Query& q, const RelationPool& pool,
                                                 const PromptTemplates& tpl) {
  if (pool.pool.empty()) throw ContractError("build_replanning_prompt: empty relation pool");
  return {{Role::kUser, render_template(tpl.replanning,
                                        {{"question", q.question},
                                         {"topic_entities", text::join(q.topic_entities, ", ")},
                                         {"relations", text::join(pool.pool, "; ")}})}};
}

namespace {

PlanningStep complete_and_parse(std::vector<ChatMessage> messages, Phase phase, LlmGateway& llm,
                                UsageLedger* ledger) {
  PlanningStep step;
  step.prompt_digests.push_back(message_digest(messages));
  auto first = llm.complete(messages, phase, ledger);
  try {
    step.paths = parse_path_sets(first.text);
    return step;
  } catch (const ParseError&) {
  }
  messages.push_back({Role::kAssistant, first.text});
  messages.push_back({Role::kUser, kPlanningFormatReminder});
  step.prompt_digests.push_back(message_digest(messages));
  auto second = llm.complete(messages, phase, ledger);
  step.paths = parse_path_sets(second.text);
  return step;
}

}  // namespace

PlanningStep plan_initial(const Query& q, LlmGateway& llm, UsageLedger* ledger,
                          const PromptTemplates& tpl) {
  return complete_and_parse(build_initial_prompt(q, tpl), Phase::kInitialPlanning, llm, ledger);
}

PlanningStep replan(const Query& q, const RelationPool& pool, const std::vector<std::string>& vocab,
                    LlmGateway& llm, EmbeddingGateway& embeddings, UsageLedger* ledger,
                    const PromptTemplates& tpl) {
  auto step = complete_and_parse(build_replanning_prompt(q, pool, tpl), Phase::kReplanning, llm, ledger);
  const std::set<std::string> known(vocab.begin(), vocab.end());
  const auto is_known = [&](const std::string& label) {
    if (known.count(label)) return true;
    if (label.size() > kInverseMarker.size() && label.ends_with(kInverseMarker)) {
      return known.count(label.substr(0, label.size() - kInverseMarker.size())) > 0;
    }
    return false;
  };

  CandidatePathSet snapped = step.paths;
  for (auto& [_, paths] : snapped.by_length) {
    std::vector<RelationPath> deduped;
    for (auto& path : paths) {
      for (auto& r : path.relations) {
        if (is_known(r)) continue;
        const auto nearest = top_k_similar_relations(embeddings, r, vocab, 1).front();
        step.snaps.push_back({r, nearest.label, nearest.score});
        r = nearest.label;
      }
      if (std::find(deduped.begin(), deduped.end(), path) == deduped.end()) deduped.push_back(path);
    }
    paths = std::move(deduped);
  }
  step.paths = std::move(snapped);
  return step;
}

}  // namespace karpa
