#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "karpa/embedding.hpp"
#include "karpa/kg_store.hpp"

namespace karpa {

// Ordered relation labels proposed by the planner (no entities).
struct RelationPath {
  std::vector<std::string> relations;

  std::size_t size() const noexcept { return relations.size(); }
  std::string joined(std::string_view sep = " ") const;
  friend auto operator<=>(const RelationPath&, const RelationPath&) = default;
};

struct PathStep {
  RelationId relation;
  EntityId entity;
  bool inverse = false;

  friend auto operator<=>(const PathStep&, const PathStep&) = default;
};

// A relation path grounded in the graph. Never revisits an entity.
struct ReasoningPath {
  EntityId start = 0;
  std::vector<PathStep> steps;

  std::size_t size() const noexcept { return steps.size(); }
  EntityId tail() const noexcept { return steps.empty() ? start : steps.back().entity; }
  std::vector<EntityId> entities() const;
  bool visits(EntityId e) const;
  friend auto operator<=>(const ReasoningPath&, const ReasoningPath&) = default;
};

struct ScoredPath {
  ReasoningPath path;
  RelationPath relation_path;
  double score = 0.0;  // higher is better
  double cost = 1.0;   // 1 - score
};

// Deterministic ranking: score descending, then relation labels, then entity ids.
bool rank_before(const ScoredPath& a, const ScoredPath& b);

enum class Strategy { kBeam, kPathfind, kHeuristic };

std::string to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

struct MatchConfig {
  Strategy strategy = Strategy::kHeuristic;
  std::size_t top_k = 16;
  std::size_t beam_width = 8;
  // Unset: longest candidate path + 1.
  std::optional<std::size_t> max_len;
  std::size_t frontier_cap = 5000;
  bool exact_mode = false;
  Direction direction = Direction::kForward;

  // Throws ContractError when top_k, beam_width, max_len or frontier_cap is 0.
  void validate() const;
};

struct MatchResult {
  std::vector<ScoredPath> paths;
  // Set when a search bound cut exploration short.
  bool truncated = false;
};

enum class OracleMode {
  kPathSimilarity,  // variable length, scored by concatenated-label similarity
  kMeanStepCost,    // fixed length |candidate|, scored by 1 - mean step cost
};

// Hard limit on enumerated paths for the exhaustive routes.
inline constexpr std::size_t kMaxEnumeratedPaths = 10'000'000;

// Matches planner candidate paths against a graph. Holds no mutable state of
// its own, so one instance may be shared across threads.
class PathMatcher {
 public:
  PathMatcher(const KnowledgeGraph& graph, EmbeddingGateway& gateway);

  // 1 - cosine(kg label, candidate label), in [0, 2].
  double step_cost(const std::string& kg_label, const std::string& candidate_label) const;
  // Cosine between the space-joined label sequences.
  double path_similarity(const std::vector<std::string>& a,
                         const std::vector<std::string>& b) const;

  // Fixed-length beam search; intermediate frontiers keep beam_width
  // prefixes by summed step cost, the last step keeps top_k.
  MatchResult beam_match(EntityId start, const RelationPath& candidate,
                         const MatchConfig& cfg) const;
  // Uniform-cost search over (entity, depth) with length-averaged cost.
  MatchResult dijkstra_avg_match(EntityId start, const RelationPath& candidate,
                                 const MatchConfig& cfg) const;
  // Variable-length best-first search scored by h = 1 - path_similarity.
  MatchResult heuristic_top_k(EntityId start, const RelationPath& candidate,
                              const MatchConfig& cfg) const;
  // Exhaustive enumeration of every cycle-free path; testing oracle.
  MatchResult brute_force_top_k(EntityId start, const RelationPath& candidate, std::size_t k,
                                std::size_t max_len, OracleMode mode,
                                Direction direction = Direction::kForward) const;

  MatchResult match(EntityId start, const RelationPath& candidate, const MatchConfig& cfg) const;

  // Matches every candidate from every start entity, unions the results
  // (best score per distinct reasoning path), re-ranks and keeps top_k.
  MatchResult match_all(std::span<const EntityId> starts, std::span<const RelationPath> candidates,
                        const MatchConfig& cfg) const;

  ScoredPath make_scored(ReasoningPath path, double score) const;

 private:
  const KnowledgeGraph& graph_;
  EmbeddingGateway& gateway_;
};

// Line-JSON match report, one object per path.
void write_match_report(std::ostream& out, const KnowledgeGraph& graph, const MatchResult& result);

}  // namespace karpa
