#include "karpa/config.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "karpa/digest.hpp"
#include "karpa/error.hpp"
#include "karpa/text.hpp"

namespace karpa {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> kKeys = {
      "kg.path",           "kg.inverse_edges",     "embedding.kind",      "embedding.endpoint",
      "embedding.model",   "embedding.dim",        "embedding.cache",     "llm.kind",
      "llm.endpoint",      "llm.model",            "llm.temperature",     "llm.max_output",
      "llm.fixtures",      "matcher.strategy",     "matcher.top_k",       "matcher.beam_width",
      "matcher.max_len",   "matcher.frontier_cap", "matcher.exact_mode",  "planner.relation_cap",
      "planner.per_relation_k", "planner.prompts_dir", "reasoner.batch_limit", "eval.mode",
      "eval.concurrency",  "eval.checkpoint_dir",  "retry.attempts",      "retry.backoff_ms",
  };
  return kKeys;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  try {
    if (v.empty() || !std::isdigit(static_cast<unsigned char>(v.front()))) throw std::invalid_argument(v);
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  const auto l = text::to_lower(v);
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base) / p).lexically_normal().string();
}

}  // namespace

ConfigMap ConfigMap::parse(std::istream& in, const std::string& source) {
  ConfigMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    map.set(std::string(text::trim(t.substr(0, eq))), std::string(text::trim(t.substr(eq + 1))));
  }
  return map;
}

ConfigMap ConfigMap::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse(in, path);
}

void ConfigMap::apply_env(
    const std::function<std::optional<std::string>(const std::string&)>& getenv) {
  for (const auto& key : known_keys()) {
    if (auto v = getenv(env_name_for(key))) values_[key] = *v;
  }
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  if (!known_keys().count(key)) throw ConfigError("unknown config key: " + key);
  values_[key] = value;
}

std::optional<std::string> ConfigMap::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string env_name_for(const std::string& key) {
  std::string out = "KARPA_";
  for (char c : key) out.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

std::optional<std::string> process_getenv(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

std::string to_string(ScoreMode mode) { return mode == ScoreMode::kStrict ? "strict" : "lenient"; }

PipelineConfig PipelineConfig::from_map(const ConfigMap& map, const std::string& base_dir) {
  PipelineConfig c;
  const auto str = [&](const char* key, std::string& out) {
    if (auto v = map.get(key)) out = *v;
  };
  const auto size = [&](const char* key, std::size_t& out) {
    if (auto v = map.get(key)) out = parse_size(key, *v);
  };

  str("kg.path", c.kg_path);
  c.kg_path = resolve(base_dir, c.kg_path);
  if (auto v = map.get("kg.inverse_edges"); v && parse_bool("kg.inverse_edges", *v)) {
    c.matcher.direction = Direction::kBoth;
  }

  str("embedding.kind", c.embedding.kind);
  str("embedding.endpoint", c.embedding.endpoint);
  str("embedding.model", c.embedding.model);
  size("embedding.dim", c.embedding.dim);
  str("embedding.cache", c.embedding.cache_path);
  c.embedding.cache_path = resolve(base_dir, c.embedding.cache_path);
  if (c.embedding.kind != "mock" && c.embedding.kind != "http") {
    throw ConfigError("embedding.kind must be mock or http, got '" + c.embedding.kind + "'");
  }
  if (c.embedding.kind == "http" && c.embedding.endpoint.empty()) {
    throw ConfigError("embedding.endpoint is required for embedding.kind = http");
  }

  str("llm.kind", c.llm.kind);
  str("llm.endpoint", c.llm.endpoint);
  str("llm.model", c.llm.model);
  if (auto v = map.get("llm.temperature")) c.llm.temperature = parse_double("llm.temperature", *v);
  if (auto v = map.get("llm.max_output")) c.llm.max_output = static_cast<int>(parse_size("llm.max_output", *v));
  str("llm.fixtures", c.llm.fixtures);
  c.llm.fixtures = resolve(base_dir, c.llm.fixtures);
  if (c.llm.kind != "scripted" && c.llm.kind != "http") {
    throw ConfigError("llm.kind must be scripted or http, got '" + c.llm.kind + "'");
  }
  if (c.llm.kind == "http" && c.llm.endpoint.empty()) {
    throw ConfigError("llm.endpoint is required for llm.kind = http");
  }
  if (c.llm.kind == "scripted" && c.llm.fixtures.empty()) {
    throw ConfigError("llm.fixtures is required for llm.kind = scripted");
  }

  if (auto v = map.get("matcher.strategy")) c.matcher.strategy = parse_strategy(*v);
  size("matcher.top_k", c.matcher.top_k);
  size("matcher.beam_width", c.matcher.beam_width);
  if (auto v = map.get("matcher.max_len")) {
    if (!v->empty() && *v != "auto") c.matcher.max_len = parse_size("matcher.max_len", *v);
  }
  size("matcher.frontier_cap", c.matcher.frontier_cap);
  if (auto v = map.get("matcher.exact_mode")) c.matcher.exact_mode = parse_bool("matcher.exact_mode", *v);
  try {
    c.matcher.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }

  size("planner.relation_cap", c.relation_cap);
  if (auto v = map.get("planner.per_relation_k")) {
    if (!v->empty() && *v != "auto") c.per_relation_k = parse_size("planner.per_relation_k", *v);
  }
  str("planner.prompts_dir", c.prompts_dir);
  c.prompts_dir = resolve(base_dir, c.prompts_dir);
  size("reasoner.batch_limit", c.batch_limit);
  if (c.batch_limit == 0) throw ConfigError("reasoner.batch_limit must be >= 1");

  if (auto v = map.get("eval.mode")) {
    if (*v == "strict") c.eval_mode = ScoreMode::kStrict;
    else if (*v == "lenient") c.eval_mode = ScoreMode::kLenient;
    else throw ConfigError("eval.mode must be strict or lenient");
  }
  size("eval.concurrency", c.eval_concurrency);
  if (c.eval_concurrency == 0) throw ConfigError("eval.concurrency must be >= 1");
  str("eval.checkpoint_dir", c.checkpoint_dir);
  c.checkpoint_dir = resolve(base_dir, c.checkpoint_dir);

  if (auto v = map.get("retry.attempts")) c.retry.attempts = static_cast<int>(parse_size("retry.attempts", *v));
  if (c.retry.attempts < 1) throw ConfigError("retry.attempts must be >= 1");
  if (auto v = map.get("retry.backoff_ms")) {
    c.retry.initial_backoff = std::chrono::milliseconds(parse_size("retry.backoff_ms", *v));
  }
  return c;
}

std::string PipelineConfig::digest() const {
  std::ostringstream ss;
  ss << "kg.path=" << std::filesystem::path(kg_path).filename().string() << '\n'
     << "kg.direction=" << static_cast<int>(matcher.direction) << '\n'
     << "embedding.kind=" << embedding.kind << '\n'
     << "embedding.model=" << embedding.model << '\n'
     << "embedding.dim=" << embedding.dim << '\n'
     << "llm.kind=" << llm.kind << '\n'
     << "llm.model=" << llm.model << '\n'
     << "llm.temperature=" << llm.temperature << '\n'
     << "llm.max_output=" << llm.max_output << '\n'
     << "matcher.strategy=" << to_string(matcher.strategy) << '\n'
     << "matcher.top_k=" << matcher.top_k << '\n'
     << "matcher.beam_width=" << matcher.beam_width << '\n'
     << "matcher.max_len=" << (matcher.max_len ? std::to_string(*matcher.max_len) : "auto") << '\n'
     << "matcher.frontier_cap=" << matcher.frontier_cap << '\n'
     << "matcher.exact_mode=" << matcher.exact_mode << '\n'
     << "planner.relation_cap=" << relation_cap << '\n'
     << "planner.per_relation_k=" << (per_relation_k ? std::to_string(*per_relation_k) : "auto") << '\n'
     << "planner.prompts_dir=" << (prompts_dir.empty() ? "builtin" : "custom") << '\n'
     << "reasoner.batch_limit=" << batch_limit << '\n'
     << "eval.mode=" << to_string(eval_mode) << '\n';
  return sha256_hex(ss.str());
}

}  // namespace karpa
