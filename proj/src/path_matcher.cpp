#include "karpa/path_matcher.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "karpa/error.hpp"
#include "karpa/text.hpp"

namespace karpa {

std::string RelationPath::joined(std::string_view sep) const { return text::join(relations, sep); }

std::vector<EntityId> ReasoningPath::entities() const {
  std::vector<EntityId> out;
  out.reserve(steps.size() + 1);
  out.push_back(start);
  for (const auto& s : steps) out.push_back(s.entity);
  return out;
}

bool ReasoningPath::visits(EntityId e) const {
  if (start == e) return true;
  return std::any_of(steps.begin(), steps.end(), [e](const PathStep& s) { return s.entity == e; });
}

bool rank_before(const ScoredPath& a, const ScoredPath& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.relation_path.relations != b.relation_path.relations) {
    return a.relation_path.relations < b.relation_path.relations;
  }
  return a.path.entities() < b.path.entities();
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kBeam: return "beam";
    case Strategy::kPathfind: return "pathfind";
    case Strategy::kHeuristic: return "heuristic";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "beam") return Strategy::kBeam;
  if (name == "pathfind" || name == "dijkstra") return Strategy::kPathfind;
  if (name == "heuristic") return Strategy::kHeuristic;
  throw ConfigError("unknown matcher strategy: " + std::string(name));
}

void MatchConfig::validate() const {
  if (top_k == 0) throw ContractError("matcher top_k must be >= 1");
  if (beam_width == 0) throw ContractError("matcher beam_width must be >= 1");
  if (max_len && *max_len == 0) throw ContractError("matcher max_len must be >= 1");
  if (frontier_cap == 0) throw ContractError("matcher frontier_cap must be >= 1");
}

namespace {

// Partial or complete path during search. `key` is the quantity being
// minimised: summed step cost for beam/pathfind, h for the heuristic search.
struct Node {
  ReasoningPath path;
  std::vector<std::string> labels;
  double key = 0.0;
};

bool node_before(const Node& a, const Node& b) {
  if (a.key != b.key) return a.key < b.key;
  if (a.labels != b.labels) return a.labels < b.labels;
  return a.path.entities() < b.path.entities();
}

struct NodeAfter {
  bool operator()(const Node& a, const Node& b) const { return node_before(b, a); }
};

// Memoized similarity lookups against one candidate path, batched through
// the gateway so that remote providers see one request per expansion.
class CandidateScorer {
 public:
  CandidateScorer(EmbeddingGateway& gateway, const RelationPath& candidate)
      : gateway_(gateway), candidate_(candidate) {}

  std::vector<double> step_costs(const std::vector<std::string>& labels, std::size_t position) {
    if (step_vectors_.empty()) step_vectors_ = gateway_.embed(candidate_.relations);
    auto& memo = step_memo_[position];
    embed_missing(labels, memo);
    std::vector<double> out;
    out.reserve(labels.size());
    for (const auto& l : labels) {
      auto it = memo.find(l);
      if (it == memo.end()) {
        const double c = 1.0 - cosine(vectors_.at(l), step_vectors_.at(position));
        it = memo.emplace(l, c).first;
      }
      out.push_back(it->second);
    }
    return out;
  }

  std::vector<double> path_similarities(const std::vector<std::string>& joined) {
    if (!whole_vector_) whole_vector_ = gateway_.embed_one(candidate_.joined());
    embed_missing(joined, path_memo_);
    std::vector<double> out;
    out.reserve(joined.size());
    for (const auto& j : joined) {
      auto it = path_memo_.find(j);
      if (it == path_memo_.end()) it = path_memo_.emplace(j, cosine(vectors_.at(j), *whole_vector_)).first;
      out.push_back(it->second);
    }
    return out;
  }

 private:
  void embed_missing(const std::vector<std::string>& texts,
                     const std::unordered_map<std::string, double>& memo) {
    std::vector<std::string> todo;
    std::set<std::string> seen;
    for (const auto& t : texts) {
      if (memo.count(t) || vectors_.count(t) || !seen.insert(t).second) continue;
      todo.push_back(t);
    }
    if (todo.empty()) return;
    auto vecs = gateway_.embed(todo);
    for (std::size_t i = 0; i < todo.size(); ++i) vectors_.emplace(todo[i], std::move(vecs[i]));
  }

  EmbeddingGateway& gateway_;
  const RelationPath& candidate_;
  std::vector<EmbeddingVector> step_vectors_;
  std::optional<EmbeddingVector> whole_vector_;
  std::unordered_map<std::string, EmbeddingVector> vectors_;
  std::map<std::size_t, std::unordered_map<std::string, double>> step_memo_;
  std::unordered_map<std::string, double> path_memo_;
};

// Cycle-free one-hop extensions of `node`.
std::vector<Node> extend(const KnowledgeGraph& g, const Node& node, Direction direction) {
  std::vector<Node> out;
  for (const auto& n : g.neighbors(node.path.tail(), direction)) {
    if (node.path.visits(n.entity)) continue;
    Node child = node;
    child.path.steps.push_back({n.relation, n.entity, n.inverse});
    child.labels.push_back(g.hop_label(n));
    out.push_back(std::move(child));
  }
  return out;
}

void check_candidate(const RelationPath& candidate) {
  if (candidate.relations.empty()) throw ContractError("candidate path is empty");
  for (const auto& r : candidate.relations) {
    if (r.empty()) throw ContractError("candidate path has an empty relation label");
  }
}

void check_fixed_length(const RelationPath& candidate, const MatchConfig& cfg) {
  check_candidate(candidate);
  cfg.validate();
  if (cfg.max_len && candidate.size() > *cfg.max_len) {
    throw ContractError("candidate length " + std::to_string(candidate.size()) +
                        " exceeds max_len " + std::to_string(*cfg.max_len));
  }
}

std::vector<std::string> collect_labels(const std::vector<Node>& nodes) {
  std::vector<std::string> labels;
  labels.reserve(nodes.size());
  for (const auto& n : nodes) labels.push_back(n.labels.back());
  return labels;
}

std::vector<std::string> collect_joined(const std::vector<Node>& nodes) {
  std::vector<std::string> joined;
  joined.reserve(nodes.size());
  for (const auto& n : nodes) joined.push_back(text::join(n.labels, " "));
  return joined;
}

// Simple paths of length [min_len, max_len] from `start`; stops counting
// once `limit` is exceeded.
std::size_t count_simple_paths(const KnowledgeGraph& g, EntityId start, std::size_t min_len,
                               std::size_t max_len, Direction direction, std::size_t limit) {
  std::vector<bool> on_path(g.entity_count(), false);
  std::size_t count = 0;
  auto walk = [&](auto& self, EntityId e, std::size_t depth) -> void {
    if (depth == max_len || count > limit) return;
    on_path[e] = true;
    for (const auto& n : g.neighbors(e, direction)) {
      if (on_path[n.entity]) continue;
      if (depth + 1 >= min_len) ++count;
      self(self, n.entity, depth + 1);
      if (count > limit) break;
    }
    on_path[e] = false;
  };
  walk(walk, start, 0);
  return count;
}

void sort_and_truncate(std::vector<ScoredPath>& paths, std::size_t k) {
  std::sort(paths.begin(), paths.end(), rank_before);
  if (paths.size() > k) paths.resize(k);
}

}  // namespace

PathMatcher::PathMatcher(const KnowledgeGraph& graph, EmbeddingGateway& gateway)
    : graph_(graph), gateway_(gateway) {}

double PathMatcher::step_cost(const std::string& kg_label,
                              const std::string& candidate_label) const {
  return 1.0 - gateway_.similarity(kg_label, candidate_label);
}

double PathMatcher::path_similarity(const std::vector<std::string>& a,
                                    const std::vector<std::string>& b) const {
  if (a.empty() || b.empty()) throw ContractError("path_similarity: empty label list");
  return gateway_.similarity(text::join(a, " "), text::join(b, " "));
}

ScoredPath PathMatcher::make_scored(ReasoningPath path, double score) const {
  ScoredPath sp;
  sp.relation_path.relations.reserve(path.size());
  for (const auto& s : path.steps) {
    sp.relation_path.relations.push_back(graph_.hop_label({s.relation, s.entity, s.inverse}));
  }
  sp.path = std::move(path);
  sp.score = score;
  sp.cost = 1.0 - score;
  return sp;
}

MatchResult PathMatcher::beam_match(EntityId start, const RelationPath& candidate,
                                    const MatchConfig& cfg) const {
  check_fixed_length(candidate, cfg);
  graph_.entity_label(start);
  CandidateScorer scorer(gateway_, candidate);
  const std::size_t n = candidate.size();

  std::vector<Node> beam{Node{ReasoningPath{start, {}}, {}, 0.0}};
  for (std::size_t depth = 0; depth < n && !beam.empty(); ++depth) {
    std::vector<Node> next;
    for (const auto& node : beam) {
      auto children = extend(graph_, node, cfg.direction);
      if (children.empty()) continue;
      const auto costs = scorer.step_costs(collect_labels(children), depth);
      for (std::size_t i = 0; i < children.size(); ++i) {
        children[i].key = node.key + costs[i];
        next.push_back(std::move(children[i]));
      }
    }
    std::sort(next.begin(), next.end(), node_before);
    const std::size_t keep = depth + 1 < n ? cfg.beam_width : cfg.top_k;
    if (next.size() > keep) next.resize(keep);
    beam = std::move(next);
  }

  MatchResult result;
  for (auto& node : beam) {
    if (node.path.size() != n) continue;
    result.paths.push_back(make_scored(std::move(node.path), 1.0 - node.key / static_cast<double>(n)));
  }
  sort_and_truncate(result.paths, cfg.top_k);
  return result;
}

MatchResult PathMatcher::dijkstra_avg_match(EntityId start, const RelationPath& candidate,
                                            const MatchConfig& cfg) const {
  check_fixed_length(candidate, cfg);
  graph_.entity_label(start);
  CandidateScorer scorer(gateway_, candidate);
  const std::size_t n = candidate.size();

  // Step costs are non-negative, so paths leave the queue in order of summed
  // cost; at fixed length that is also the order of mean cost.
  std::priority_queue<Node, std::vector<Node>, NodeAfter> frontier;
  frontier.push(Node{ReasoningPath{start, {}}, {}, 0.0});
  std::map<EntityId, std::size_t> per_final_state;
  MatchResult result;

  while (!frontier.empty() && result.paths.size() < cfg.top_k) {
    Node node = frontier.top();
    frontier.pop();
    if (node.path.size() == n) {
      auto& count = per_final_state[node.path.tail()];
      if (count >= cfg.top_k) continue;
      ++count;
      result.paths.push_back(make_scored(std::move(node.path), 1.0 - node.key / static_cast<double>(n)));
      continue;
    }
    auto children = extend(graph_, node, cfg.direction);
    if (children.empty()) continue;
    const auto costs = scorer.step_costs(collect_labels(children), node.path.size());
    for (std::size_t i = 0; i < children.size(); ++i) {
      children[i].key = node.key + costs[i];
      frontier.push(std::move(children[i]));
    }
    if (!cfg.exact_mode && frontier.size() > cfg.frontier_cap) {
      // Drop the worst entries; the result may no longer be exact.
      std::vector<Node> kept;
      kept.reserve(cfg.frontier_cap);
      while (kept.size() < cfg.frontier_cap) {
        kept.push_back(frontier.top());
        frontier.pop();
      }
      frontier = decltype(frontier)(NodeAfter{}, std::move(kept));
      result.truncated = true;
    }
  }
  sort_and_truncate(result.paths, cfg.top_k);
  return result;
}

MatchResult PathMatcher::heuristic_top_k(EntityId start, const RelationPath& candidate,
                                         const MatchConfig& cfg) const {
  check_candidate(candidate);
  cfg.validate();
  graph_.entity_label(start);
  const std::size_t max_len = cfg.max_len.value_or(candidate.size() + 1);
  CandidateScorer scorer(gateway_, candidate);

  // Frontier ordered best-first by the prefix's own h; every prefix is also
  // a complete variable-length result.
  std::set<Node, decltype(&node_before)> frontier(&node_before);
  std::vector<ScoredPath> best;
  MatchResult result;
  std::size_t expansions = 0;
  std::size_t scored = 0;

  auto score_children = [&](const Node& parent) {
    auto children = extend(graph_, parent, cfg.direction);
    if (children.empty()) return;
    scored += children.size();
    if (scored > kMaxEnumeratedPaths) {
      throw CapacityError("heuristic search exceeded " + std::to_string(kMaxEnumeratedPaths) +
                          " paths");
    }
    const auto sims = scorer.path_similarities(collect_joined(children));
    for (std::size_t i = 0; i < children.size(); ++i) {
      children[i].key = 1.0 - sims[i];
      best.push_back(make_scored(children[i].path, sims[i]));
      if (children[i].path.size() < max_len) frontier.insert(std::move(children[i]));
    }
    if (best.size() > 4 * cfg.top_k) sort_and_truncate(best, cfg.top_k);
    if (!cfg.exact_mode && frontier.size() > cfg.frontier_cap) {
      auto cut = frontier.begin();
      std::advance(cut, static_cast<std::ptrdiff_t>(cfg.frontier_cap));
      frontier.erase(cut, frontier.end());
      result.truncated = true;
    }
  };

  score_children(Node{ReasoningPath{start, {}}, {}, 0.0});
  while (!frontier.empty()) {
    if (!cfg.exact_mode && expansions >= cfg.frontier_cap) {
      result.truncated = true;
      break;
    }
    Node node = std::move(frontier.extract(frontier.begin()).value());
    ++expansions;
    score_children(node);
  }
  sort_and_truncate(best, cfg.top_k);
  result.paths = std::move(best);
  return result;
}

MatchResult PathMatcher::brute_force_top_k(EntityId start, const RelationPath& candidate,
                                           std::size_t k, std::size_t max_len, OracleMode mode,
                                           Direction direction) const {
  check_candidate(candidate);
  if (k == 0) throw ContractError("brute_force_top_k: k must be >= 1");
  graph_.entity_label(start);
  const std::size_t n = candidate.size();
  const std::size_t min_len = mode == OracleMode::kMeanStepCost ? n : 1;
  const std::size_t depth_limit = mode == OracleMode::kMeanStepCost ? n : max_len;

  if (count_simple_paths(graph_, start, min_len, depth_limit, direction, kMaxEnumeratedPaths) >
      kMaxEnumeratedPaths) {
    throw CapacityError("brute force exceeds " + std::to_string(kMaxEnumeratedPaths) + " paths");
  }
  std::vector<Node> all;
  std::vector<Node> stack{Node{ReasoningPath{start, {}}, {}, 0.0}};
  while (!stack.empty()) {
    Node node = std::move(stack.back());
    stack.pop_back();
    if (node.path.size() >= depth_limit) continue;
    for (auto& child : extend(graph_, node, direction)) {
      if (child.path.size() >= min_len) all.push_back(child);
      stack.push_back(std::move(child));
    }
  }

  MatchResult result;
  CandidateScorer scorer(gateway_, candidate);
  if (mode == OracleMode::kPathSimilarity) {
    const auto sims = scorer.path_similarities(collect_joined(all));
    for (std::size_t i = 0; i < all.size(); ++i) {
      result.paths.push_back(make_scored(std::move(all[i].path), sims[i]));
    }
  } else {
    for (auto& node : all) {
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) sum += scorer.step_costs({node.labels[j]}, j).front();
      result.paths.push_back(make_scored(std::move(node.path), 1.0 - sum / static_cast<double>(n)));
    }
  }
  sort_and_truncate(result.paths, k);
  return result;
}

MatchResult PathMatcher::match(EntityId start, const RelationPath& candidate,
                               const MatchConfig& cfg) const {
  switch (cfg.strategy) {
    case Strategy::kBeam: return beam_match(start, candidate, cfg);
    case Strategy::kPathfind: return dijkstra_avg_match(start, candidate, cfg);
    case Strategy::kHeuristic: return heuristic_top_k(start, candidate, cfg);
  }
  throw ContractError("unknown strategy");
}

MatchResult PathMatcher::match_all(std::span<const EntityId> starts,
                                   std::span<const RelationPath> candidates,
                                   const MatchConfig& cfg) const {
  cfg.validate();
  MatchConfig effective = cfg;
  if (!effective.max_len) {
    std::size_t longest = 0;
    for (const auto& c : candidates) longest = std::max(longest, c.size());
    effective.max_len = longest + 1;
  }
  std::map<ReasoningPath, ScoredPath> merged;
  MatchResult result;
  for (EntityId start : starts) {
    for (const auto& candidate : candidates) {
      auto part = match(start, candidate, effective);
      result.truncated = result.truncated || part.truncated;
      for (auto& sp : part.paths) {
        auto it = merged.find(sp.path);
        if (it == merged.end()) {
          merged.emplace(sp.path, std::move(sp));
        } else if (sp.score > it->second.score) {
          it->second = std::move(sp);
        }
      }
    }
  }
  for (auto& [_, sp] : merged) result.paths.push_back(std::move(sp));
  sort_and_truncate(result.paths, cfg.top_k);
  return result;
}

void write_match_report(std::ostream& out, const KnowledgeGraph& graph,
                        const MatchResult& result) {
  std::size_t rank = 1;
  for (const auto& sp : result.paths) {
    nlohmann::json entities = nlohmann::json::array();
    for (EntityId e : sp.path.entities()) entities.push_back(graph.entity_label(e));
    nlohmann::json line = {{"rank", rank++},
                           {"score", sp.score},
                           {"cost", sp.cost},
                           {"relations", sp.relation_path.relations},
                           {"entities", entities},
                           {"truncated", result.truncated}};
    out << line.dump() << '\n';
  }
}

}  // namespace karpa
