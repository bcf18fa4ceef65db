#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "karpa/error.hpp"
#include "karpa/eval.hpp"
#include "karpa/text.hpp"
#include "support.hpp"

using namespace karpa;
using karpa::test::TempDir;

namespace {

AnswerSet answers(const std::vector<std::string>& xs, const std::vector<bool>& grounded = {}) {
  AnswerSet s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    s.add({xs[i], {}, 0, grounded.empty() ? true : static_cast<bool>(grounded[i])});
  }
  return s;
}

std::string report_text(const EvalReport& r) {
  std::ostringstream out;
  r.write(out);
  return out.str();
}

}  // namespace

TEST(ScoreSample, AnalyticFixtures) {
  auto s = score_sample(answers({"a"}), {{"a"}}, ScoreMode::kLenient);
  EXPECT_EQ(s.hit1, 1);
  EXPECT_DOUBLE_EQ(s.precision, 1.0);
  EXPECT_DOUBLE_EQ(s.recall, 1.0);
  EXPECT_DOUBLE_EQ(s.f1, 1.0);
  EXPECT_EQ(s.exact, 1);

  s = score_sample(answers({"a", "b"}), {{"a"}, {"c"}}, ScoreMode::kLenient);
  EXPECT_EQ(s.hit1, 1);
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
  EXPECT_DOUBLE_EQ(s.f1, 0.5);
  EXPECT_EQ(s.exact, 0);

  s = score_sample(answers({}), {{"a"}}, ScoreMode::kLenient);
  EXPECT_EQ(s.hit1, 0);
  EXPECT_DOUBLE_EQ(s.precision, 0.0);
  EXPECT_DOUBLE_EQ(s.recall, 0.0);
  EXPECT_DOUBLE_EQ(s.f1, 0.0);
  EXPECT_EQ(s.exact, 0);
}

TEST(ScoreSample, AliasesAndNormalization) {
  const auto s = score_sample(answers({"  united   KINGDOM "}), {{"UK", "United Kingdom"}}, ScoreMode::kLenient);
  EXPECT_EQ(s.exact, 1);
  EXPECT_DOUBLE_EQ(s.f1, 1.0);
}

TEST(ScoreSample, ExactNeedsBijection) {
  // Both predictions match the same single gold: precision 1, not exact.
  const auto s = score_sample(answers({"UK", "Britain"}), {{"UK", "Britain"}}, ScoreMode::kLenient);
  EXPECT_DOUBLE_EQ(s.precision, 1.0);
  EXPECT_EQ(s.exact, 0);
  const auto t = score_sample(answers({"b", "a"}), {{"a"}, {"b"}}, ScoreMode::kLenient);
  EXPECT_EQ(t.exact, 1);
}

TEST(ScoreSample, StrictDropsUngrounded) {
  const auto pred = answers({"a", "zz"}, {true, false});
  const auto lenient = score_sample(pred, {{"a"}, {"zz"}}, ScoreMode::kLenient);
  const auto strict = score_sample(pred, {{"a"}, {"zz"}}, ScoreMode::kStrict);
  EXPECT_EQ(lenient.predicted, (std::vector<std::string>{"a", "zz"}));
  EXPECT_EQ(strict.predicted, (std::vector<std::string>{"a"}));
  EXPECT_DOUBLE_EQ(strict.recall, 0.5);
}

TEST(ScoreSample, RandomizedIdentityAndBounds) {
  std::mt19937 rng(7);
  const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f", "g", "h"};
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> preds;
    std::vector<bool> grounded;
    const int np = static_cast<int>(rng() % 6);
    for (int j = 0; j < np; ++j) {
      preds.push_back(pool[rng() % pool.size()]);
      grounded.push_back(rng() % 3 != 0);
    }
    std::vector<std::vector<std::string>> gold;
    const int ng = 1 + static_cast<int>(rng() % 4);
    for (int j = 0; j < ng; ++j) gold.push_back({pool[rng() % pool.size()]});
    const auto pred = answers(preds, grounded);
    const auto lenient = score_sample(pred, gold, ScoreMode::kLenient);
    const auto strict = score_sample(pred, gold, ScoreMode::kStrict);
    for (const auto* s : {&lenient, &strict}) {
      for (double v : {s->precision, s->recall, s->f1}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
      const double expect_f1 =
          s->precision + s->recall > 0 ? 2 * s->precision * s->recall / (s->precision + s->recall) : 0.0;
      EXPECT_NEAR(s->f1, expect_f1, 1e-12);
      EXPECT_EQ(s->hit1, s->precision > 0 ? 1 : 0);
      if (s->exact) EXPECT_DOUBLE_EQ(s->f1, 1.0);
    }
    const std::set<std::string> lp(lenient.predicted.begin(), lenient.predicted.end());
    for (const auto& p : strict.predicted) EXPECT_TRUE(lp.count(p));

    // Independent recount with single-alias golds.
    std::set<std::string> ps(lenient.predicted.begin(), lenient.predicted.end());
    std::size_t mp = 0;
    std::size_t mg = 0;
    std::set<std::string> gs;
    for (const auto& g : gold) gs.insert(g[0]);
    for (const auto& p : ps) mp += gs.count(p);
    for (const auto& g : gold) mg += ps.count(g[0]);
    EXPECT_DOUBLE_EQ(lenient.precision, ps.empty() ? 0.0 : double(mp) / double(ps.size()));
    EXPECT_DOUBLE_EQ(lenient.recall, double(mg) / double(gold.size()));
  }
}

TEST(Aggregate, MacroMean) {
  SampleRecord a;
  a.id = "1";
  a.score.f1 = 1.0;
  a.score.hit1 = 1;
  SampleRecord b;
  b.id = "2";
  const auto agg = aggregate({a, b});
  EXPECT_DOUBLE_EQ(agg.f1, 0.5);
  EXPECT_DOUBLE_EQ(agg.hit1, 0.5);
  EXPECT_EQ(agg.samples, 2u);
}

TEST(SampleRecord, JsonRoundTrip) {
  SampleRecord r;
  r.id = "x";
  r.score = score_sample(answers({"a", "b"}), {{"a"}, {"c"}}, ScoreMode::kLenient);
  r.usage.total.calls = 3;
  r.usage.by_phase[2].calls = 1;
  r.selected_paths = 5;
  r.fallback_initial = true;
  r.error = "boom";
  const auto back = SampleRecord::from_json(r.to_json());
  EXPECT_EQ(back.to_json().dump(), r.to_json().dump());
  EXPECT_EQ(back.usage, r.usage);
}

TEST(LoadDataset, SimpleFormat) {
  TempDir dir;
  std::ofstream(dir.file("d.jsonl"))
      << R"({"id":"first","question":"Q1?","topics":["A"],"answers":[["x","X1"],["y"]]})" << "\n\n"
      << R"({"question":"Q2?","topics":["B","C"],"answers":[["z"]]})" << "\n";
  const auto d = load_dataset(dir.file("d.jsonl"), DatasetFormat::kSimple);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].id, "first");
  EXPECT_EQ(d[0].gold_answers, (std::vector<std::vector<std::string>>{{"x", "X1"}, {"y"}}));
  EXPECT_EQ(d[1].question, "Q2?");
  EXPECT_EQ(d[1].topic_entities, (std::vector<std::string>{"B", "C"}));
}

TEST(LoadDataset, MissingAnswersNamesRecord) {
  TempDir dir;
  std::ofstream(dir.file("d.jsonl")) << R"({"question":"Q","topics":["A"],"answers":[["x"]]})" << "\n"
                                     << R"({"question":"Q","topics":["A"]})" << "\n";
  try {
    load_dataset(dir.file("d.jsonl"), DatasetFormat::kSimple);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(load_dataset(dir.file("none.jsonl"), DatasetFormat::kSimple), DataError);
}

TEST(LoadDataset, WebqspOriginalDocument) {
  TempDir dir;
  std::ofstream(dir.file("w.json")) << R"({"Questions":[{"QuestionId":"WebQTest-1","RawQuestion":"who is tom?",
    "Parses":[{"TopicEntityName":"Tom","Answers":[{"AnswerArgument":"m.01","EntityName":"Jane"}]}]}]})";
  const auto d = load_dataset(dir.file("w.json"), DatasetFormat::kWebQsp);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].id, "WebQTest-1");
  EXPECT_EQ(d[0].topic_entities, (std::vector<std::string>{"Tom"}));
  ASSERT_EQ(d[0].gold_answers.size(), 1u);
  EXPECT_EQ(d[0].gold_answers[0][0], "Jane");
}

TEST(LoadDataset, CwqArrayWithAliases) {
  TempDir dir;
  std::ofstream(dir.file("c.json"))
      << R"([{"ID":"c1","question":"q1","q_entity":["A"],"answers":[{"answer":"Paris","aliases":["City of Light"]}]},
             {"ID":"c2","question":"q2","topic_entities":["B"],"answers":["Rome"]}])";
  const auto d = load_dataset(dir.file("c.json"), DatasetFormat::kCwq);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].gold_answers[0], (std::vector<std::string>{"Paris", "City of Light"}));
  EXPECT_EQ(d[1].topic_entities, (std::vector<std::string>{"B"}));
  EXPECT_EQ(d[1].gold_answers[0], (std::vector<std::string>{"Rome"}));
}

TEST(Evaluate, Toy5Fixture) {
  auto rt = karpa::test::fixture_runtime("toy5");
  const auto samples = load_dataset(karpa::test::fixture("toy5/questions.jsonl"), DatasetFormat::kSimple);
  ASSERT_EQ(samples.size(), 5u);
  const auto report = evaluate(samples, *rt->pipeline, {ScoreMode::kLenient, 1, "", rt->config.digest()});
  EXPECT_DOUBLE_EQ(report.aggregates.hit1, 1.0);
  EXPECT_DOUBLE_EQ(report.aggregates.calls_per_question, 3.0);
  EXPECT_EQ(report.aggregates.errors, 0u);
  for (const auto& r : report.samples) {
    EXPECT_EQ(r.usage.total.calls, 2 + (r.selected_paths + 7) / 8) << r.id;
  }
  const auto recomputed = aggregate(report.samples);
  EXPECT_DOUBLE_EQ(recomputed.f1, report.aggregates.f1);
}

TEST(Evaluate, ReportsAreByteIdenticalAcrossRunsAndThreads) {
  const auto samples = load_dataset(karpa::test::fixture("toy20/questions.jsonl"), DatasetFormat::kSimple);
  auto run = [&](std::size_t threads) {
    auto rt = karpa::test::fixture_runtime("toy20");
    return report_text(evaluate(samples, *rt->pipeline, {ScoreMode::kLenient, threads, "", rt->config.digest()}));
  };
  const auto a = run(1);
  EXPECT_EQ(a, run(1));
  EXPECT_EQ(a, run(4));
}

TEST(Evaluate, SampleErrorsBecomeZeroScores) {
  auto rt = karpa::test::fixture_runtime("toy5");
  QASample bad{"bad", "A question nobody scripted?", {"Kenya"}, {{"x"}}};
  const auto report = evaluate({bad}, *rt->pipeline, {});
  ASSERT_EQ(report.samples.size(), 1u);
  ASSERT_TRUE(report.samples[0].error.has_value());
  EXPECT_EQ(report.samples[0].score.f1, 0.0);
  EXPECT_EQ(report.aggregates.errors, 1u);
}

TEST(Evaluate, CheckpointsResume) {
  TempDir dir;
  const auto samples = load_dataset(karpa::test::fixture("toy5/questions.jsonl"), DatasetFormat::kSimple);
  auto rt = karpa::test::fixture_runtime("toy5");
  const EvalOptions opts{ScoreMode::kLenient, 1, dir.path().string(), rt->config.digest()};
  const auto first = report_text(evaluate(samples, *rt->pipeline, opts));
  EXPECT_EQ(rt->llm->ledger().snapshot().total.calls, 15u);

  auto fresh = karpa::test::fixture_runtime("toy5");
  const auto second = report_text(evaluate(samples, *fresh->pipeline, opts));
  EXPECT_EQ(first, second);
  EXPECT_EQ(fresh->llm->ledger().snapshot().total.calls, 0u);

  auto other = opts;
  other.config_digest = "different";
  evaluate(samples, *fresh->pipeline, other);
  EXPECT_EQ(fresh->llm->ledger().snapshot().total.calls, 15u);
}
