#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace karpa {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

// Suffix appended to relation labels traversed against edge direction.
inline constexpr std::string_view kInverseMarker = "~inv";

enum class Direction { kForward, kInverse, kBoth };

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// One hop out of an entity. `inverse` is set when the hop follows an edge
// backwards (tail -> head).
struct Neighbor {
  RelationId relation;
  EntityId entity;
  bool inverse = false;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Dense label <-> id table, ids assigned in first-appearance order.
class LabelTable {
 public:
  std::uint32_t intern(std::string_view label);
  std::optional<std::uint32_t> find(std::string_view label) const;
  const std::string& label(std::uint32_t id) const;
  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

// Immutable triple store with forward and inverse adjacency indexes.
class KnowledgeGraph {
 public:
  class Builder;

  KnowledgeGraph() = default;

  std::size_t entity_count() const noexcept { return entities_.size(); }
  std::size_t relation_count() const noexcept { return relations_.size(); }
  std::size_t triple_count() const noexcept { return triples_.size(); }
  const std::vector<Triple>& triples() const noexcept { return triples_; }

  const std::string& entity_label(EntityId id) const;
  const std::string& relation_label(RelationId id) const;
  std::optional<EntityId> find_entity(std::string_view label) const { return entities_.find(label); }
  std::optional<RelationId> find_relation(std::string_view label) const {
    return relations_.find(label);
  }
  // Entity id for `label`; throws NotFoundError.
  EntityId entity(std::string_view label) const;

  // Neighbors sorted by (relation-id, entity-id); forward entries precede
  // inverse entries for Direction::kBoth.
  std::vector<Neighbor> neighbors(EntityId e, Direction direction) const;

  // Label as seen by traversal: inverse hops carry the inverse marker.
  std::string hop_label(const Neighbor& n) const;

  // All relation labels, deduplicated and sorted lexicographically.
  std::vector<std::string> relation_vocabulary() const;

  // TSV dump, one triple per line, sorted by (head, relation, tail) label
  // bytes so that dump -> load -> dump is byte-identical.
  void dump(std::ostream& out) const;

 private:
  friend class Builder;

  using Adjacency = std::vector<std::pair<RelationId, EntityId>>;

  LabelTable entities_;
  LabelTable relations_;
  std::vector<Triple> triples_;
  std::vector<Adjacency> out_index_;
  std::vector<Adjacency> in_index_;
};

class KnowledgeGraph::Builder {
 public:
  void add(std::string_view head, std::string_view relation, std::string_view tail);
  KnowledgeGraph build() &&;

 private:
  KnowledgeGraph graph_;
  std::vector<Triple> pending_;
};

// Parses `head<TAB>relation<TAB>tail` lines. Blank lines and lines starting
// with '#' are skipped. Throws ParseError naming the 1-based line number.
KnowledgeGraph load_triples(std::istream& in);
KnowledgeGraph load_triples_file(const std::string& path);

}  // namespace karpa
