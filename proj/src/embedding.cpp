#include "karpa/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "karpa/digest.hpp"
#include "karpa/error.hpp"
#include "karpa/http.hpp"

namespace karpa {

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw ContractError("cosine: dimension mismatch " + std::to_string(a.dim()) + " vs " +
                        std::to_string(b.dim()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine: zero vector");
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> mock_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace

EmbeddingVector mock_embed(std::string_view text, std::size_t dim) {
  if (dim < 8) throw ContractError("mock_embed: dim must be >= 8");
  const auto tokens = mock_tokens(text);
  if (tokens.empty()) throw DomainError("mock_embed: no tokens in '" + std::string(text) + "'");
  EmbeddingVector v;
  v.values.assign(dim, 0.0);
  for (const auto& tok : tokens) {
    v.values[fnv1a("w:" + tok) % dim] += 1.0;
    for (std::size_t i = 0; i + 3 <= tok.size(); ++i) {
      v.values[fnv1a("g:" + tok.substr(i, 3)) % dim] += 1.0;
    }
  }
  double norm = 0.0;
  for (double x : v.values) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v.values) x /= norm;
  return v;
}

MockEmbeddingProvider::MockEmbeddingProvider(std::size_t dim) : dim_(dim) {
  if (dim < 8) throw ConfigError("mock embedding dim must be >= 8");
}

std::string MockEmbeddingProvider::identity() const {
  return "mock/hash-trigram-" + std::to_string(dim_);
}

std::vector<EmbeddingVector> MockEmbeddingProvider::embed_batch(
    std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(mock_embed(t, dim_));
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string endpoint, std::string model,
                                             std::string api_key, int timeout_seconds)
    : endpoint_(std::move(endpoint)),
      model_(std::move(model)),
      api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds) {}

std::string HttpEmbeddingProvider::identity() const { return "http/" + model_; }

std::vector<EmbeddingVector> HttpEmbeddingProvider::embed_batch(
    std::span<const std::string> texts) {
  nlohmann::json body = {{"model", model_}, {"input", texts}};
  const auto reply = http_post_json(endpoint_, body, api_key_, timeout_seconds_);
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<bool> filled(texts.size(), false);
  try {
    for (const auto& item : reply.at("data")) {
      const auto index = item.at("index").get<std::size_t>();
      if (index >= texts.size() || filled[index]) {
        throw ProviderError("embedding response has bad index " + std::to_string(index), false);
      }
      out[index].values = item.at("embedding").get<std::vector<double>>();
      filled[index] = true;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed embedding response: ") + e.what(), false);
  }
  if (std::find(filled.begin(), filled.end(), false) != filled.end()) {
    throw ProviderError("embedding response is missing entries", false);
  }
  for (const auto& v : out) {
    for (double x : v.values) {
      if (!std::isfinite(x)) throw ProviderError("embedding contains non-finite values", false);
    }
  }
  return out;
}

EmbeddingGateway::EmbeddingGateway(std::shared_ptr<EmbeddingProvider> provider, RetryPolicy retry)
    : provider_(std::move(provider)),
      retry_(retry),
      identity_(provider_->identity()),
      identity_digest_(sha256_hex(identity_)) {}

std::vector<EmbeddingVector> EmbeddingGateway::embed(std::span<const std::string> texts) {
  if (texts.empty()) throw ContractError("embed: empty batch");
  std::vector<std::string> keys;
  keys.reserve(texts.size());
  for (const auto& t : texts) {
    if (t.empty()) throw ContractError("embed: empty text");
    keys.push_back(sha256_hex(t));
  }

  std::vector<EmbeddingVector> out(texts.size());
  std::vector<std::size_t> missing;
  {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      auto it = cache_.find(keys[i]);
      if (it != cache_.end()) {
        out[i] = it->second;
        ++cache_hits_;
      } else {
        missing.push_back(i);
      }
    }
  }
  if (missing.empty()) return out;

  // Unique misses only; duplicates within the batch share one provider slot.
  std::vector<std::string> batch;
  std::vector<std::string> batch_keys;
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i : missing) {
    if (slot.emplace(keys[i], batch.size()).second) {
      batch.push_back(texts[i]);
      batch_keys.push_back(keys[i]);
    }
  }
  auto vectors = with_retries(retry_, [&] { return provider_->embed_batch(batch); });
  ++provider_calls_;
  texts_sent_ += batch.size();
  if (vectors.size() != batch.size()) {
    throw ContractError("embedding provider returned " + std::to_string(vectors.size()) +
                        " vectors for " + std::to_string(batch.size()) + " texts");
  }

  std::lock_guard lock(mu_);
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto& v = vectors[j];
    if (v.dim() == 0) throw ContractError("embedding provider returned an empty vector");
    if (!dim_) dim_ = v.dim();
    if (*dim_ != v.dim()) {
      throw ContractError("embedding dimension drift: " + std::to_string(*dim_) + " -> " +
                          std::to_string(v.dim()));
    }
    const auto& key = batch_keys[j];
    if (cache_.emplace(key, v).second && cache_out_.is_open()) {
      nlohmann::json rec = {
          {"identity", identity_digest_}, {"text", key}, {"dim", v.dim()}, {"values", v.values}};
      cache_out_ << rec.dump() << '\n';
      cache_out_.flush();
    }
  }
  for (std::size_t i : missing) out[i] = vectors[slot.at(keys[i])];
  return out;
}

EmbeddingVector EmbeddingGateway::embed_one(const std::string& text) {
  return embed(std::span<const std::string>(&text, 1)).front();
}

double EmbeddingGateway::similarity(const std::string& a, const std::string& b) {
  std::vector<std::string> pair{a, b};
  const auto v = embed(pair);
  return cosine(v[0], v[1]);
}

void EmbeddingGateway::attach_cache_file(const std::string& path) {
  std::lock_guard lock(mu_);
  const bool exists = std::filesystem::exists(path);
  if (exists) {
    std::ifstream in(path);
    std::string line;
    if (!std::getline(in, line) || line != kEmbeddingCacheHeader) {
      throw DataError("embedding cache " + path + " has an unknown header");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const auto rec = nlohmann::json::parse(line);
        if (rec.at("identity").get<std::string>() != identity_digest_) continue;
        EmbeddingVector v{rec.at("values").get<std::vector<double>>()};
        if (v.dim() != rec.at("dim").get<std::size_t>()) {
          throw ParseError("dim field disagrees with values", line_no);
        }
        if (!dim_) dim_ = v.dim();
        if (*dim_ != v.dim()) throw ContractError("embedding cache mixes dimensions");
        cache_.emplace(rec.at("text").get<std::string>(), std::move(v));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError("embedding cache " + path + " line " + std::to_string(line_no) + ": " +
                             e.what(),
                         line_no);
      }
    }
  }
  cache_out_.open(path, std::ios::app);
  if (!cache_out_) throw DataError("cannot open embedding cache for append: " + path);
  if (!exists) cache_out_ << kEmbeddingCacheHeader << '\n';
  cache_out_.flush();
}

EmbeddingStats EmbeddingGateway::stats() const {
  return {provider_calls_.load(), texts_sent_.load(), cache_hits_.load()};
}

std::size_t EmbeddingGateway::cached_entries() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

std::vector<ScoredLabel> top_k_similar_relations(EmbeddingGateway& gateway,
                                                 const std::string& query,
                                                 const std::vector<std::string>& vocab,
                                                 std::size_t k) {
  if (vocab.empty()) throw ContractError("top_k_similar_relations: empty vocabulary");
  const auto q = gateway.embed_one(query);
  const auto vectors = gateway.embed(vocab);
  std::vector<ScoredLabel> ranked;
  ranked.reserve(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) ranked.push_back({vocab[i], cosine(q, vectors[i])});
  const auto by_score = [](const ScoredLabel& a, const ScoredLabel& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.label < b.label;
  };
  const std::size_t n = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), ranked.end(),
                    by_score);
  ranked.resize(n);
  return ranked;
}

CacheFileStats embedding_cache_stats(const std::string& path) {
  CacheFileStats stats;
  std::ifstream in(path);
  if (!in) return stats;
  std::string line;
  if (!std::getline(in, line) || line != kEmbeddingCacheHeader) {
    throw DataError("embedding cache " + path + " has an unknown header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded()) throw DataError("embedding cache " + path + " has a corrupt record");
    ++stats.records;
    ++stats.per_identity[rec.value("identity", std::string("?"))];
  }
  return stats;
}

void clear_embedding_cache(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write embedding cache: " + path);
  out << kEmbeddingCacheHeader << '\n';
}

}  // namespace karpa
