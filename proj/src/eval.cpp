#include "karpa/eval.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "karpa/error.hpp"
#include "karpa/text.hpp"

namespace karpa {

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "webqsp") return DatasetFormat::kWebQsp;
  if (name == "cwq") return DatasetFormat::kCwq;
  if (name == "simple") return DatasetFormat::kSimple;
  throw ConfigError("unknown dataset format: " + std::string(name));
}

namespace {

using nlohmann::json;

[[noreturn]] void record_error(std::size_t index, const std::string& what) {
  throw ParseError("record " + std::to_string(index) + ": " + what, index);
}

const json& require(const json& rec, std::size_t index, const char* field) {
  if (!rec.is_object() || !rec.contains(field) || rec[field].is_null()) {
    record_error(index, std::string("missing required field '") + field + "'");
  }
  return rec[field];
}

std::vector<std::string> string_list(const json& j, std::size_t index, const char* field) {
  std::vector<std::string> out;
  if (j.is_string()) {
    out.push_back(j.get<std::string>());
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (!v.is_string()) record_error(index, std::string("non-string entry in '") + field + "'");
      out.push_back(v.get<std::string>());
    }
  } else {
    record_error(index, std::string("field '") + field + "' must be a string or list");
  }
  return out;
}

std::string record_id(const json& rec, std::size_t index) {
  for (const char* key : {"id", "ID", "QuestionId"}) {
    if (rec.contains(key) && !rec[key].is_null()) {
      return rec[key].is_string() ? rec[key].get<std::string>() : rec[key].dump();
    }
  }
  return "q" + std::to_string(index);
}

void finish(QASample& s, std::size_t index) {
  if (s.question.empty()) record_error(index, "empty question");
  if (s.topic_entities.empty()) record_error(index, "no topic entities");
  if (s.gold_answers.empty()) record_error(index, "no gold answers");
}

QASample from_simple(const json& rec, std::size_t index) {
  QASample s;
  s.id = record_id(rec, index);
  s.question = require(rec, index, "question").get<std::string>();
  s.topic_entities = string_list(require(rec, index, "topics"), index, "topics");
  const auto& answers = require(rec, index, "answers");
  if (!answers.is_array()) record_error(index, "'answers' must be a list");
  for (const auto& a : answers) s.gold_answers.push_back(string_list(a, index, "answers"));
  finish(s, index);
  return s;
}

std::vector<std::vector<std::string>> answers_from(const json& rec, std::size_t index) {
  std::vector<std::vector<std::string>> gold;
  if (rec.contains("answers") && rec["answers"].is_array()) {
    for (const auto& a : rec["answers"]) {
      if (a.is_string()) {
        gold.push_back({a.get<std::string>()});
        continue;
      }
      std::vector<std::string> aliases;
      for (const char* key : {"answer", "EntityName", "AnswerArgument"}) {
        if (a.contains(key) && a[key].is_string()) aliases.push_back(a[key].get<std::string>());
      }
      if (a.contains("aliases") && a["aliases"].is_array()) {
        for (const auto& al : a["aliases"]) {
          if (al.is_string()) aliases.push_back(al.get<std::string>());
        }
      }
      if (aliases.empty()) record_error(index, "answer entry without a name");
      gold.push_back(std::move(aliases));
    }
  } else if (rec.contains("answer") && !rec["answer"].is_null()) {
    for (auto& a : string_list(rec["answer"], index, "answer")) gold.push_back({std::move(a)});
  } else {
    record_error(index, "missing required field 'answers'");
  }
  return gold;
}

std::vector<std::string> topics_from(const json& rec, std::size_t index) {
  for (const char* key : {"q_entity", "topic_entities", "topics", "topic_entity"}) {
    if (rec.contains(key) && !rec[key].is_null()) return string_list(rec[key], index, key);
  }
  record_error(index, "missing required field 'q_entity'");
}

QASample from_flat(const json& rec, std::size_t index) {
  QASample s;
  s.id = record_id(rec, index);
  s.question = require(rec, index, "question").get<std::string>();
  s.topic_entities = topics_from(rec, index);
  s.gold_answers = answers_from(rec, index);
  finish(s, index);
  return s;
}

QASample from_webqsp_original(const json& rec, std::size_t index) {
  QASample s;
  s.id = record_id(rec, index);
  if (rec.contains("RawQuestion")) s.question = rec["RawQuestion"].get<std::string>();
  else s.question = require(rec, index, "ProcessedQuestion").get<std::string>();
  const auto& parses = require(rec, index, "Parses");
  std::vector<std::string> seen_answers;
  for (const auto& p : parses) {
    if (p.contains("TopicEntityName") && p["TopicEntityName"].is_string()) {
      auto t = p["TopicEntityName"].get<std::string>();
      if (std::find(s.topic_entities.begin(), s.topic_entities.end(), t) == s.topic_entities.end()) {
        s.topic_entities.push_back(std::move(t));
      }
    }
    if (!p.contains("Answers")) continue;
    for (const auto& a : p["Answers"]) {
      std::vector<std::string> aliases;
      for (const char* key : {"EntityName", "AnswerArgument"}) {
        if (a.contains(key) && a[key].is_string()) aliases.push_back(a[key].get<std::string>());
      }
      if (aliases.empty()) continue;
      if (std::find(seen_answers.begin(), seen_answers.end(), aliases.front()) != seen_answers.end()) continue;
      seen_answers.push_back(aliases.front());
      s.gold_answers.push_back(std::move(aliases));
    }
  }
  finish(s, index);
  return s;
}

std::vector<json> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};

  if (content[first] == '[' || content[first] == '{') {
    auto whole = json::parse(content, nullptr, false);
    if (!whole.is_discarded()) {
      if (whole.is_array()) return whole.get<std::vector<json>>();
      if (whole.is_object() && whole.contains("Questions")) return whole["Questions"].get<std::vector<json>>();
      if (whole.is_object()) return {whole};
    }
  }
  std::vector<json> records;
  std::istringstream lines(content);
  std::string line;
  std::size_t index = 0;
  while (std::getline(lines, line)) {
    if (text::trim(line).empty()) continue;
    ++index;
    auto rec = json::parse(line, nullptr, false);
    if (rec.is_discarded()) record_error(index, "malformed JSON");
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

std::vector<QASample> load_dataset(const std::string& path, DatasetFormat format) {
  const auto records = read_records(path);
  std::vector<QASample> samples;
  samples.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    const std::size_t index = i + 1;
    try {
      switch (format) {
        case DatasetFormat::kSimple: samples.push_back(from_simple(rec, index)); break;
        case DatasetFormat::kWebQsp:
          samples.push_back(rec.contains("Parses") ? from_webqsp_original(rec, index) : from_flat(rec, index));
          break;
        case DatasetFormat::kCwq: samples.push_back(from_flat(rec, index)); break;
      }
    } catch (const json::exception& e) {
      record_error(index, e.what());
    }
  }
  return samples;
}

namespace {

// Kuhn's augmenting-path bipartite matching; returns the matching size.
std::size_t max_matching(const std::vector<std::vector<bool>>& adj, std::size_t right) {
  std::vector<int> match_right(right, -1);
  std::function<bool(std::size_t, std::vector<bool>&)> augment = [&](std::size_t u, std::vector<bool>& seen) {
    for (std::size_t v = 0; v < right; ++v) {
      if (!adj[u][v] || seen[v]) continue;
      seen[v] = true;
      if (match_right[v] < 0 || augment(static_cast<std::size_t>(match_right[v]), seen)) {
        match_right[v] = static_cast<int>(u);
        return true;
      }
    }
    return false;
  };
  std::size_t size = 0;
  for (std::size_t u = 0; u < adj.size(); ++u) {
    std::vector<bool> seen(right, false);
    if (augment(u, seen)) ++size;
  }
  return size;
}

}  // namespace

SampleScore score_sample(const AnswerSet& predicted,
                         const std::vector<std::vector<std::string>>& gold, ScoreMode mode) {
  SampleScore s;
  std::vector<std::string> preds;
  for (const auto& a : predicted.answers()) {
    if (mode == ScoreMode::kStrict && !a.grounded) continue;
    s.predicted.push_back(a.surface);
    preds.push_back(text::normalize_answer(a.surface));
  }
  std::vector<std::vector<std::string>> golds;
  for (const auto& aliases : gold) {
    std::vector<std::string> norm;
    for (const auto& al : aliases) norm.push_back(text::normalize_answer(al));
    golds.push_back(std::move(norm));
  }

  std::vector<std::vector<bool>> adj(preds.size(), std::vector<bool>(golds.size(), false));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < golds.size(); ++j) {
      adj[i][j] = std::find(golds[j].begin(), golds[j].end(), preds[i]) != golds[j].end();
    }
  }
  std::size_t matched_preds = 0;
  for (const auto& row : adj) matched_preds += std::any_of(row.begin(), row.end(), [](bool b) { return b; });
  std::size_t matched_golds = 0;
  for (std::size_t j = 0; j < golds.size(); ++j) {
    matched_golds += std::any_of(adj.begin(), adj.end(), [j](const auto& row) { return row[j]; });
  }

  s.hit1 = matched_preds > 0 ? 1 : 0;
  s.precision = preds.empty() ? 0.0 : static_cast<double>(matched_preds) / static_cast<double>(preds.size());
  s.recall = golds.empty() ? 0.0 : static_cast<double>(matched_golds) / static_cast<double>(golds.size());
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  s.exact = !preds.empty() && preds.size() == golds.size() && max_matching(adj, golds.size()) == preds.size()
                ? 1
                : 0;
  return s;
}

nlohmann::json SampleRecord::to_json() const {
  return {{"id", id},
          {"hit1", score.hit1},
          {"precision", score.precision},
          {"recall", score.recall},
          {"f1", score.f1},
          {"exact", score.exact},
          {"predicted", score.predicted},
          {"usage", karpa::to_json(usage)},
          {"selected_paths", selected_paths},
          {"fallback_initial", fallback_initial},
          {"match_truncated", match_truncated},
          {"error", error ? nlohmann::json(*error) : nlohmann::json()}};
}

SampleRecord SampleRecord::from_json(const nlohmann::json& j) {
  SampleRecord r;
  r.id = j.at("id").get<std::string>();
  r.score.hit1 = j.at("hit1").get<int>();
  r.score.precision = j.at("precision").get<double>();
  r.score.recall = j.at("recall").get<double>();
  r.score.f1 = j.at("f1").get<double>();
  r.score.exact = j.at("exact").get<int>();
  r.score.predicted = j.at("predicted").get<std::vector<std::string>>();
  const auto read_counts = [](const nlohmann::json& c) {
    return UsageCounts{c.at("calls").get<std::uint64_t>(), c.at("prompt_tokens").get<std::uint64_t>(),
                       c.at("completion_tokens").get<std::uint64_t>(),
                       c.at("estimated_calls").get<std::uint64_t>()};
  };
  const auto& usage = j.at("usage");
  r.usage.total = read_counts(usage);
  for (std::size_t i = 0; i < kPhaseCount; ++i) {
    r.usage.by_phase[i] = read_counts(usage.at("by_phase").at(to_string(static_cast<Phase>(i))));
  }
  r.selected_paths = j.at("selected_paths").get<std::size_t>();
  r.fallback_initial = j.at("fallback_initial").get<bool>();
  r.match_truncated = j.at("match_truncated").get<bool>();
  if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  return r;
}

Aggregates aggregate(const std::vector<SampleRecord>& records) {
  Aggregates a;
  a.samples = records.size();
  if (records.empty()) return a;
  for (const auto& r : records) {
    a.errors += r.error ? 1 : 0;
    a.hit1 += r.score.hit1;
    a.f1 += r.score.f1;
    a.precision += r.score.precision;
    a.recall += r.score.recall;
    a.accuracy_exact += r.score.exact;
    a.calls_per_question += static_cast<double>(r.usage.total.calls);
    a.prompt_tokens_per_question += static_cast<double>(r.usage.total.prompt_tokens);
    a.completion_tokens_per_question += static_cast<double>(r.usage.total.completion_tokens);
    a.tokens_estimated = a.tokens_estimated || r.usage.total.estimated_calls > 0;
  }
  const auto n = static_cast<double>(records.size());
  a.hit1 /= n;
  a.f1 /= n;
  a.precision /= n;
  a.recall /= n;
  a.accuracy_exact /= n;
  a.accuracy_recall = a.recall;
  a.calls_per_question /= n;
  a.prompt_tokens_per_question /= n;
  a.completion_tokens_per_question /= n;
  return a;
}

namespace {

std::vector<std::pair<std::string, nlohmann::json>> aggregate_rows(const EvalReport& r) {
  const auto& a = r.aggregates;
  return {{"samples", a.samples},
          {"errors", a.errors},
          {"hit1", a.hit1},
          {"f1", a.f1},
          {"precision", a.precision},
          {"recall", a.recall},
          {"accuracy_exact", a.accuracy_exact},
          {"accuracy_recall", a.accuracy_recall},
          {"calls_per_question", a.calls_per_question},
          {"prompt_tokens_per_question", a.prompt_tokens_per_question},
          {"completion_tokens_per_question", a.completion_tokens_per_question},
          {"tokens_estimated", a.tokens_estimated}};
}

}  // namespace

void EvalReport::write(std::ostream& out) const {
  nlohmann::json header = {{"format", "karpa-eval-report"},
                           {"version", 1},
                           {"config_digest", config_digest},
                           {"mode", to_string(mode)},
                           {"averaging", "macro"},
                           {"samples", samples.size()}};
  out << header.dump() << '\n';
  for (const auto& s : samples) out << nlohmann::json{{"sample", s.to_json()}}.dump() << '\n';
  nlohmann::json agg = nlohmann::json::object();
  for (const auto& [k, v] : aggregate_rows(*this)) agg[k] = v;
  agg["usage"] = karpa::to_json(usage);
  out << nlohmann::json{{"aggregate", agg}}.dump() << '\n';
}

void EvalReport::write_summary_tsv(std::ostream& out) const {
  out << "metric\tvalue\n";
  for (const auto& [k, v] : aggregate_rows(*this)) out << k << '\t' << v.dump() << '\n';
}

namespace {

std::string checkpoint_file(const std::string& dir, const std::string& id) {
  std::string safe;
  for (char c : id) safe.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_');
  return (std::filesystem::path(dir) / (safe + ".json")).string();
}

std::optional<SampleRecord> load_checkpoint(const std::string& file, const std::string& digest) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || j.value("config_digest", std::string()) != digest) return std::nullopt;
  try {
    return SampleRecord::from_json(j.at("record"));
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

SampleRecord run_one(const QASample& sample, const Pipeline& pipeline, ScoreMode mode,
                     nlohmann::json* trace_out) {
  SampleRecord rec;
  rec.id = sample.id;
  UsageLedger ledger;
  try {
    auto trace = pipeline.run(sample.query(), &ledger);
    rec.score = score_sample(trace.answers(), sample.gold_answers, mode);
    rec.selected_paths = trace.matched.paths.size();
    rec.fallback_initial = trace.fallback_initial;
    rec.match_truncated = trace.matched.truncated;
    rec.error = trace.error;
    if (trace_out) *trace_out = trace.to_json(pipeline.graph());
  } catch (const std::exception& e) {
    rec.score = SampleScore{};
    rec.error = e.what();
  }
  rec.usage = ledger.snapshot();
  return rec;
}

}  // namespace

EvalReport evaluate(const std::vector<QASample>& samples, const Pipeline& pipeline,
                    const EvalOptions& options) {
  EvalReport report;
  report.config_digest = options.config_digest;
  report.mode = options.mode;
  report.samples.resize(samples.size());
  if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      const auto& sample = samples[i];
      if (options.checkpoint_dir.empty()) {
        report.samples[i] = run_one(sample, pipeline, options.mode, nullptr);
        continue;
      }
      const auto file = checkpoint_file(options.checkpoint_dir, sample.id);
      if (auto done = load_checkpoint(file, options.config_digest)) {
        report.samples[i] = std::move(*done);
        continue;
      }
      nlohmann::json trace;
      report.samples[i] = run_one(sample, pipeline, options.mode, &trace);
      const nlohmann::json checkpoint = {{"config_digest", options.config_digest},
                                         {"record", report.samples[i].to_json()},
                                         {"trace", trace}};
      std::ofstream out(file, std::ios::trunc);
      out << checkpoint.dump() << '\n';
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.concurrency, samples.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (const auto& r : report.samples) report.usage += r.usage;
  report.aggregates = aggregate(report.samples);
  return report;
}

}  // namespace karpa
