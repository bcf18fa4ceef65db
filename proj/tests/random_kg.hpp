#pragma once

#include <random>
#include <string>
#include <vector>

#include "karpa/kg_store.hpp"
#include "karpa/path_matcher.hpp"

namespace karpa::test {

struct RandomInstance {
  KnowledgeGraph graph;
  EntityId start = 0;
  RelationPath candidate;
  std::size_t max_len = 1;
};

// Seeded random graph: up to 200 entities and 50 relation labels drawn from
// a small word pool so that embeddings overlap and ties occur.
inline RandomInstance random_instance(std::uint32_t seed) {
  static const std::vector<std::string> kWords{
      "people", "person", "location", "country", "film", "music", "capital", "birth",
      "place", "member", "author", "genre", "parent", "child", "spouse", "team"};
  std::mt19937 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  const std::size_t n_entities = 20 + pick(181);
  const std::size_t n_relations = 5 + pick(46);
  std::vector<std::string> relations;
  for (std::size_t i = 0; i < n_relations; ++i) {
    relations.push_back(kWords[pick(kWords.size())] + "." + kWords[pick(kWords.size())] + "." +
                        kWords[pick(kWords.size())]);
  }
  const std::size_t n_triples = n_entities * (2 + pick(2));
  KnowledgeGraph::Builder b;
  b.add("e0", relations[0], "e1");
  for (std::size_t i = 0; i < n_triples; ++i) {
    b.add("e" + std::to_string(pick(n_entities)), relations[pick(relations.size())],
          "e" + std::to_string(pick(n_entities)));
  }
  RandomInstance inst;
  inst.graph = std::move(b).build();
  inst.start = inst.graph.entity("e0");
  const std::size_t len = 1 + pick(3);
  for (std::size_t i = 0; i < len; ++i) inst.candidate.relations.push_back(relations[pick(relations.size())]);
  inst.max_len = len + pick(5 - len);
  return inst;
}

}  // namespace karpa::test
