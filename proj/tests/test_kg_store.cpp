#include <gtest/gtest.h>

#include <sstream>

#include "karpa/error.hpp"
#include "karpa/kg_store.hpp"
#include "support.hpp"

using namespace karpa;

namespace {

KnowledgeGraph load(const std::string& text) {
  std::istringstream in(text);
  return load_triples(in);
}

std::string dump(const KnowledgeGraph& g) {
  std::ostringstream out;
  g.dump(out);
  return out.str();
}

}  // namespace

TEST(KgStore, ThreeDistinctLines) {
  auto g = load("a\tr\tb\nb\tr\tc\na\ts\tc\n");
  EXPECT_EQ(g.triple_count(), 3u);
  EXPECT_EQ(g.entity_count(), 3u);
  EXPECT_EQ(g.relation_count(), 2u);
}

TEST(KgStore, DuplicateLineStoredOnce) {
  auto g = load("a\tr\tb\na\tr\tb\n");
  EXPECT_EQ(g.triple_count(), 1u);
  EXPECT_EQ(g.neighbors(g.entity("a"), Direction::kForward).size(), 1u);
  EXPECT_EQ(g.neighbors(g.entity("b"), Direction::kInverse).size(), 1u);
}

TEST(KgStore, WrongFieldCountReportsLine) {
  try {
    load("a\tb\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  try {
    load("# comment\nx\ty\tz\n\nq\tw\te\tr\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(KgStore, EmptyFieldRejected) { EXPECT_THROW(load("a\t\tb\n"), ParseError); }

TEST(KgStore, EmptyStreamGivesEmptyGraph) {
  auto g = load("");
  EXPECT_EQ(g.triple_count(), 0u);
  EXPECT_TRUE(g.relation_vocabulary().empty());
}

TEST(KgStore, CommentsAndCarriageReturnsSkipped) {
  auto g = load("# header\r\na\tr\tb\r\n");
  EXPECT_EQ(g.triple_count(), 1u);
  EXPECT_TRUE(g.find_entity("b").has_value());
}

TEST(KgStore, FirstAppearanceIds) {
  auto g = load("x\tr2\ty\nz\tr1\tx\n");
  EXPECT_EQ(g.entity("x"), 0u);
  EXPECT_EQ(g.entity("y"), 1u);
  EXPECT_EQ(g.entity("z"), 2u);
  EXPECT_EQ(*g.find_relation("r2"), 0u);
  EXPECT_EQ(*g.find_relation("r1"), 1u);
}

TEST(KgStore, NeighborsForwardAndInverse) {
  auto g = load("A\tr\tB\n");
  const auto a = g.entity("A");
  const auto b = g.entity("B");
  auto fwd = g.neighbors(a, Direction::kForward);
  ASSERT_EQ(fwd.size(), 1u);
  EXPECT_EQ(g.hop_label(fwd[0]), "r");
  EXPECT_EQ(fwd[0].entity, b);
  EXPECT_TRUE(g.neighbors(b, Direction::kForward).empty());
  auto inv = g.neighbors(b, Direction::kInverse);
  ASSERT_EQ(inv.size(), 1u);
  EXPECT_EQ(g.hop_label(inv[0]), "r~inv");
  EXPECT_EQ(inv[0].entity, a);
  EXPECT_TRUE(inv[0].inverse);
}

TEST(KgStore, NeighborsSortedAndBothIsConcatenation) {
  auto g = load("A\tq\tD\nA\tp\tC\nA\tp\tB\nE\tp\tA\n");
  const auto a = g.entity("A");
  auto fwd = g.neighbors(a, Direction::kForward);
  for (std::size_t i = 1; i < fwd.size(); ++i) {
    EXPECT_LT(std::make_pair(fwd[i - 1].relation, fwd[i - 1].entity),
              std::make_pair(fwd[i].relation, fwd[i].entity));
  }
  auto inv = g.neighbors(a, Direction::kInverse);
  auto both = g.neighbors(a, Direction::kBoth);
  ASSERT_EQ(both.size(), fwd.size() + inv.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) EXPECT_EQ(both[i], fwd[i]);
  for (std::size_t i = 0; i < inv.size(); ++i) EXPECT_EQ(both[fwd.size() + i], inv[i]);
}

TEST(KgStore, InvalidIdIsNotFound) {
  auto g = load("A\tr\tB\n");
  EXPECT_THROW(g.neighbors(99, Direction::kForward), NotFoundError);
  EXPECT_THROW(g.entity("missing"), NotFoundError);
  EXPECT_THROW(g.entity_label(7), NotFoundError);
}

TEST(KgStore, VocabularySortedDeduplicated) {
  auto g = load("x\tb\ty\nx\ta\tz\ny\ta\tz\n");
  EXPECT_EQ(g.relation_vocabulary(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(g.relation_vocabulary().size(), g.relation_count());
}

TEST(KgStore, EveryTripleIndexedOnceEachWay) {
  auto g = load("A\tr\tB\nB\tr\tC\nA\ts\tC\nC\tr\tA\nA\tr\tB\n");
  std::size_t out_total = 0;
  std::size_t in_total = 0;
  for (EntityId e = 0; e < g.entity_count(); ++e) {
    out_total += g.neighbors(e, Direction::kForward).size();
    in_total += g.neighbors(e, Direction::kInverse).size();
  }
  EXPECT_EQ(out_total, g.triple_count());
  EXPECT_EQ(in_total, g.triple_count());
  for (const auto& t : g.triples()) {
    auto fwd = g.neighbors(t.head, Direction::kForward);
    EXPECT_EQ(std::count(fwd.begin(), fwd.end(), Neighbor{t.relation, t.tail, false}), 1);
    auto inv = g.neighbors(t.tail, Direction::kInverse);
    EXPECT_EQ(std::count(inv.begin(), inv.end(), Neighbor{t.relation, t.head, true}), 1);
  }
}

TEST(KgStore, DumpLoadDumpIsByteIdentical) {
  // Id order of this input differs from the order the dump re-interns.
  auto g = load("A\tr\tB\nC\tr\tD\nA\ts\tD\nD\tr\tX\n");
  const auto first = dump(g);
  const auto second = dump(load(first));
  EXPECT_EQ(first, second);
  EXPECT_EQ(load(first).triple_count(), 4u);
}

TEST(KgStore, RandomGraphsDumpFixpoint) {
  std::mt19937 rng(7);
  for (int round = 0; round < 20; ++round) {
    std::ostringstream in;
    for (int i = 0; i < 60; ++i) {
      in << "e" << rng() % 25 << "\tr" << rng() % 6 << "\te" << rng() % 25 << '\n';
    }
    auto g = load(in.str());
    const auto d = dump(g);
    EXPECT_EQ(d, dump(load(d)));
  }
}

TEST(KgStore, LoadFileMissingIsDataError) {
  EXPECT_THROW(load_triples_file("/nonexistent/kg.tsv"), DataError);
}
