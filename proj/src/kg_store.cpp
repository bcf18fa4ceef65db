#include "karpa/kg_store.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "karpa/error.hpp"

namespace karpa {

std::uint32_t LabelTable::intern(std::string_view label) {
  if (label.empty()) throw ContractError("empty label");
  auto it = ids_.find(std::string(label));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(labels_.size());
  labels_.emplace_back(label);
  ids_.emplace(labels_.back(), id);
  return id;
}

std::optional<std::uint32_t> LabelTable::find(std::string_view label) const {
  auto it = ids_.find(std::string(label));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& LabelTable::label(std::uint32_t id) const {
  if (id >= labels_.size()) throw NotFoundError("unknown id " + std::to_string(id));
  return labels_[id];
}

const std::string& KnowledgeGraph::entity_label(EntityId id) const { return entities_.label(id); }

const std::string& KnowledgeGraph::relation_label(RelationId id) const {
  return relations_.label(id);
}

EntityId KnowledgeGraph::entity(std::string_view label) const {
  auto id = entities_.find(label);
  if (!id) throw NotFoundError("entity not in graph: " + std::string(label));
  return *id;
}

std::vector<Neighbor> KnowledgeGraph::neighbors(EntityId e, Direction direction) const {
  if (e >= entities_.size()) throw NotFoundError("unknown entity id " + std::to_string(e));
  std::vector<Neighbor> out;
  if (direction != Direction::kInverse) {
    for (const auto& [r, t] : out_index_[e]) out.push_back({r, t, false});
  }
  if (direction != Direction::kForward) {
    for (const auto& [r, h] : in_index_[e]) out.push_back({r, h, true});
  }
  return out;
}

std::string KnowledgeGraph::hop_label(const Neighbor& n) const {
  std::string label = relation_label(n.relation);
  if (n.inverse) label.append(kInverseMarker);
  return label;
}

std::vector<std::string> KnowledgeGraph::relation_vocabulary() const {
  std::vector<std::string> vocab = relations_.labels();
  std::sort(vocab.begin(), vocab.end());
  return vocab;
}

void KnowledgeGraph::dump(std::ostream& out) const {
  std::vector<std::string> lines;
  lines.reserve(triples_.size());
  for (const auto& t : triples_) {
    lines.push_back(entities_.label(t.head) + '\t' + relations_.label(t.relation) + '\t' +
                    entities_.label(t.tail));
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& l : lines) out << l << '\n';
}

void KnowledgeGraph::Builder::add(std::string_view head, std::string_view relation,
                                  std::string_view tail) {
  Triple t{graph_.entities_.intern(head), graph_.relations_.intern(relation),
           graph_.entities_.intern(tail)};
  pending_.push_back(t);
}

KnowledgeGraph KnowledgeGraph::Builder::build() && {
  // Dedup while keeping first-appearance order of the stored triples.
  std::set<Triple> seen;
  for (const auto& t : pending_) {
    if (seen.insert(t).second) graph_.triples_.push_back(t);
  }
  const std::size_t n = graph_.entities_.size();
  graph_.out_index_.assign(n, {});
  graph_.in_index_.assign(n, {});
  for (const auto& t : graph_.triples_) {
    graph_.out_index_[t.head].emplace_back(t.relation, t.tail);
    graph_.in_index_[t.tail].emplace_back(t.relation, t.head);
  }
  for (auto& adj : graph_.out_index_) std::sort(adj.begin(), adj.end());
  for (auto& adj : graph_.in_index_) std::sort(adj.begin(), adj.end());
  return std::move(graph_);
}

KnowledgeGraph load_triples(std::istream& in) {
  KnowledgeGraph::Builder builder;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto first = line.find('\t');
    const auto second = first == std::string::npos ? first : line.find('\t', first + 1);
    if (second == std::string::npos || line.find('\t', second + 1) != std::string::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 tab-separated fields",
                       line_no);
    }
    std::string_view view(line);
    auto head = view.substr(0, first);
    auto rel = view.substr(first + 1, second - first - 1);
    auto tail = view.substr(second + 1);
    if (head.empty() || rel.empty() || tail.empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty field", line_no);
    }
    builder.add(head, rel, tail);
  }
  return std::move(builder).build();
}

KnowledgeGraph load_triples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open triple file: " + path);
  return load_triples(in);
}

}  // namespace karpa
