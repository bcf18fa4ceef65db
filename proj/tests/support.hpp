#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "karpa/embedding.hpp"
#include "karpa/kg_store.hpp"
#include "karpa/llm.hpp"
#include "karpa/pipeline.hpp"

namespace karpa::test {

using TripleText = std::array<std::string, 3>;

inline KnowledgeGraph graph_of(const std::vector<TripleText>& triples) {
  KnowledgeGraph::Builder b;
  for (const auto& t : triples) b.add(t[0], t[1], t[2]);
  return std::move(b).build();
}

inline std::shared_ptr<EmbeddingGateway> mock_gateway(std::size_t dim = 64) {
  return std::make_shared<EmbeddingGateway>(std::make_shared<MockEmbeddingProvider>(dim));
}

inline std::string fixture(const std::string& rel) {
  return (std::filesystem::path(KARPA_FIXTURE_DIR) / rel).string();
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("karpa-test-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Counts calls and texts; used to observe caching behaviour.
class CountingProvider final : public EmbeddingProvider {
 public:
  explicit CountingProvider(std::size_t dim = 16) : inner_(dim) {}
  std::string identity() const override { return "counting/" + inner_.identity(); }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
    ++calls;
    batches.emplace_back(texts.begin(), texts.end());
    return inner_.embed_batch(texts);
  }

  int calls = 0;
  std::vector<std::vector<std::string>> batches;

 private:
  MockEmbeddingProvider inner_;
};

// Runtime for a shipped fixture directory, with `key=value` overrides.
inline std::unique_ptr<PipelineRuntime> fixture_runtime(
    const std::string& name, const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  const auto dir = fixture(name);
  auto map = ConfigMap::load_file(dir + "/karpa.conf");
  for (const auto& [k, v] : overrides) map.set(k, v);
  return PipelineRuntime::create(PipelineConfig::from_map(map, dir));
}

// Answers every completion through a callback; counts calls.
class FunctionLlm final : public LlmProvider {
 public:
  using Fn = std::function<std::string(const std::vector<ChatMessage>&)>;
  explicit FunctionLlm(Fn fn) : fn_(std::move(fn)) {}
  std::string identity() const override { return "function"; }
  CompletionResult complete(const std::vector<ChatMessage>& messages, const CompletionParams&) override {
    ++calls;
    CompletionResult r;
    r.text = fn_(messages);
    r.tokens_estimated = true;
    return r;
  }
  int calls = 0;

 private:
  Fn fn_;
};

}  // namespace karpa::test
