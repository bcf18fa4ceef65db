#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "karpa/config.hpp"
#include "karpa/llm.hpp"
#include "karpa/pipeline.hpp"
#include "karpa/reasoner.hpp"

namespace karpa {

struct QASample {
  std::string id;
  std::string question;
  std::vector<std::string> topic_entities;
  // One entry per gold answer, each a list of accepted aliases.
  std::vector<std::vector<std::string>> gold_answers;

  Query query() const { return {id, question, topic_entities}; }
};

enum class DatasetFormat { kWebQsp, kCwq, kSimple };
DatasetFormat parse_dataset_format(std::string_view name);

// webqsp: the original {"Questions": [...]} document or line-JSON records
// with question / q_entity / answer fields. cwq: a JSON array or line-JSON
// with question, answers (objects with answer + aliases, or strings) and
// topic entities under q_entity or topic_entities. simple: line-JSON
// {id, question, topics: [...], answers: [[alias...]...]}.
// Throws ParseError carrying the 1-based record index.
std::vector<QASample> load_dataset(const std::string& path, DatasetFormat format);

struct SampleScore {
  int hit1 = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int exact = 0;
  std::vector<std::string> predicted;  // after mode filtering
};

// Strict mode drops ungrounded predictions before scoring.
SampleScore score_sample(const AnswerSet& predicted,
                         const std::vector<std::vector<std::string>>& gold, ScoreMode mode);

struct SampleRecord {
  std::string id;
  SampleScore score;
  UsageSnapshot usage;
  std::size_t selected_paths = 0;
  bool fallback_initial = false;
  bool match_truncated = false;
  std::optional<std::string> error;

  nlohmann::json to_json() const;
  static SampleRecord from_json(const nlohmann::json& j);
};

struct Aggregates {
  std::size_t samples = 0;
  std::size_t errors = 0;
  double hit1 = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy_exact = 0.0;
  double accuracy_recall = 0.0;
  double calls_per_question = 0.0;
  double prompt_tokens_per_question = 0.0;
  double completion_tokens_per_question = 0.0;
  bool tokens_estimated = false;
};

// Macro means over the records.
Aggregates aggregate(const std::vector<SampleRecord>& records);

struct EvalReport {
  std::string config_digest;
  ScoreMode mode = ScoreMode::kLenient;
  std::vector<SampleRecord> samples;
  Aggregates aggregates;
  UsageSnapshot usage;

  // Header line, one line per sample, then the aggregate block.
  void write(std::ostream& out) const;
  // "metric<TAB>value" rows.
  void write_summary_tsv(std::ostream& out) const;
};

struct EvalOptions {
  ScoreMode mode = ScoreMode::kLenient;
  std::size_t concurrency = 1;
  std::string checkpoint_dir;  // empty: no checkpointing
  std::string config_digest;
};

// Runs the pipeline on every sample. Per-sample failures become zero-score
// records with the error text. With a checkpoint directory, each finished
// sample is written to <dir>/<id>.json together with its trace, and samples
// whose checkpoint carries the same config digest are not rerun.
EvalReport evaluate(const std::vector<QASample>& samples, const Pipeline& pipeline,
                    const EvalOptions& options);

}  // namespace karpa
