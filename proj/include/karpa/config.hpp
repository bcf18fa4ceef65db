#pragma once

#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>

#include "karpa/path_matcher.hpp"

namespace karpa {

// Flat `dotted.key = value` settings. '#' starts a comment line.
class ConfigMap {
 public:
  static ConfigMap parse(std::istream& in, const std::string& source = "<config>");
  static ConfigMap load_file(const std::string& path);

  // For every known key, KARPA_<KEY> (upper-cased, '.' -> '_') overrides
  // the file value when set.
  void apply_env(const std::function<std::optional<std::string>(const std::string&)>& getenv);
  void set(const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::string env_name_for(const std::string& key);
std::optional<std::string> process_getenv(const std::string& name);

enum class ScoreMode { kStrict, kLenient };

struct EmbeddingSettings {
  std::string kind = "mock";  // mock | http
  std::string endpoint;
  std::string model = "all-MiniLM-L6-v2";
  std::size_t dim = 64;
  std::string cache_path;  // empty: in-memory only
  std::string api_key;
};

struct LlmSettings {
  std::string kind = "scripted";  // scripted | http
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  int max_output = 2048;
  std::string fixtures;
  std::string api_key;
};

struct PipelineConfig {
  std::string kg_path;
  EmbeddingSettings embedding;
  LlmSettings llm;
  MatchConfig matcher;
  std::size_t relation_cap = 30;
  std::optional<std::size_t> per_relation_k;
  std::string prompts_dir;
  std::size_t batch_limit = 8;
  ScoreMode eval_mode = ScoreMode::kLenient;
  std::size_t eval_concurrency = 1;
  std::string checkpoint_dir;
  RetryPolicy retry;

  // Relative paths are resolved against `base_dir`. Throws ConfigError.
  static PipelineConfig from_map(const ConfigMap& map, const std::string& base_dir = ".");

  // Digest over every setting that can change answers or scores. Secrets,
  // concurrency and cache/checkpoint locations are excluded.
  std::string digest() const;
};

std::string to_string(ScoreMode mode);

}  // namespace karpa
