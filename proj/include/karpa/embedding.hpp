#pragma once

#include <atomic>
#include <cstddef>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "karpa/retry.hpp"

namespace karpa {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

// Cosine similarity. Throws ContractError on dimension mismatch and
// DomainError when either vector has zero norm.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Deterministic offline embedding: hashed token and character-trigram
// counts, L2-normalized. Tokens split on any non-alphanumeric character.
EmbeddingVector mock_embed(std::string_view text, std::size_t dim);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Provider name plus model name; part of every cache key.
  virtual std::string identity() const = 0;
  // Order-preserving batch embedding.
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) = 0;
};

class MockEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit MockEmbeddingProvider(std::size_t dim);
  std::string identity() const override;
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
};

// Client for `{"model", "input": [...]}` -> `{"data": [{"index", "embedding"}]}`.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string endpoint, std::string model, std::string api_key,
                        int timeout_seconds = 60);
  std::string identity() const override;
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

 private:
  std::string endpoint_;
  std::string model_;
  std::string api_key_;
  int timeout_seconds_;
};

struct EmbeddingStats {
  std::size_t provider_calls = 0;
  std::size_t texts_sent = 0;
  std::size_t cache_hits = 0;
};

// Cache-first embedding front end shared by planner and matcher.
class EmbeddingGateway {
 public:
  explicit EmbeddingGateway(std::shared_ptr<EmbeddingProvider> provider,
                            RetryPolicy retry = {});

  const std::string& identity() const noexcept { return identity_; }

  // Texts must be non-empty. Misses are sent to the provider in one batch.
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts);
  EmbeddingVector embed_one(const std::string& text);

  double similarity(const std::string& a, const std::string& b);

  // Loads records for this provider identity from `path` (creating the file
  // with a header if absent) and appends every subsequent miss to it.
  // Entries embedded before attaching are not written.
  void attach_cache_file(const std::string& path);

  EmbeddingStats stats() const;
  std::size_t cached_entries() const;

 private:
  std::shared_ptr<EmbeddingProvider> provider_;
  RetryPolicy retry_;
  std::string identity_;
  std::string identity_digest_;

  mutable std::mutex mu_;
  std::unordered_map<std::string, EmbeddingVector> cache_;  // text digest -> vector
  std::optional<std::size_t> dim_;
  std::ofstream cache_out_;

  std::atomic<std::size_t> provider_calls_{0};
  std::atomic<std::size_t> texts_sent_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

struct ScoredLabel {
  std::string label;
  double score;

  friend bool operator==(const ScoredLabel&, const ScoredLabel&) = default;
};

// The k vocabulary labels closest to `query` by cosine, score descending,
// ties broken by label. Returns the whole ranking when k exceeds the vocabulary.
std::vector<ScoredLabel> top_k_similar_relations(EmbeddingGateway& gateway,
                                                 const std::string& query,
                                                 const std::vector<std::string>& vocab,
                                                 std::size_t k);

// Embedding cache file inspection for the CLI.
inline constexpr std::string_view kEmbeddingCacheHeader =
    R"({"format":"karpa-embedding-cache","version":1})";

struct CacheFileStats {
  std::size_t records = 0;
  std::unordered_map<std::string, std::size_t> per_identity;
};

CacheFileStats embedding_cache_stats(const std::string& path);
void clear_embedding_cache(const std::string& path);

}  // namespace karpa
