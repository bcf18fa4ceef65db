#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "karpa/retry.hpp"

namespace karpa {

enum class Role { kSystem, kUser, kAssistant };
std::string to_string(Role role);

struct ChatMessage {
  Role role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct CompletionParams {
  std::string model;
  double temperature = 0.0;
  int max_output = 2048;
};

struct CompletionResult {
  std::string text;
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
  // True when the counts above come from estimate_tokens.
  bool tokens_estimated = false;
};

enum class Phase { kInitialPlanning = 0, kReplanning = 1, kReasoning = 2 };
inline constexpr std::size_t kPhaseCount = 3;
std::string to_string(Phase phase);

struct UsageCounts {
  std::uint64_t calls = 0;
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
  std::uint64_t estimated_calls = 0;

  UsageCounts& operator+=(const UsageCounts& o);
  friend bool operator==(const UsageCounts&, const UsageCounts&) = default;
};

struct UsageSnapshot {
  UsageCounts total;
  std::array<UsageCounts, kPhaseCount> by_phase{};

  UsageSnapshot& operator+=(const UsageSnapshot& o);
  friend bool operator==(const UsageSnapshot&, const UsageSnapshot&) = default;
};

// Thread-safe call and token counters, totals plus a per-phase breakdown.
class UsageLedger {
 public:
  void record(Phase phase, const CompletionResult& result);
  void merge(const UsageSnapshot& other);
  UsageSnapshot snapshot() const;

 private:
  mutable std::mutex mu_;
  UsageSnapshot data_;
};

// ceil(code points / 4).
std::uint64_t estimate_tokens(std::string_view text);

// SHA-256 over the canonical JSON form of the conversation.
std::string message_digest(const std::vector<ChatMessage>& messages);

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  virtual std::string identity() const = 0;
  // Token counts of zero with tokens_estimated=true mean "not reported".
  virtual CompletionResult complete(const std::vector<ChatMessage>& messages,
                                    const CompletionParams& params) = 0;
};

// Replays recorded responses keyed by message_digest.
class ScriptedLlmProvider final : public LlmProvider {
 public:
  ScriptedLlmProvider() = default;
  // Reads line-JSON records {"digest": ..., "response_text": ...}.
  static ScriptedLlmProvider from_file(const std::string& path);

  void add(std::string digest, std::string response_text);
  std::size_t size() const noexcept { return responses_.size(); }

  std::string identity() const override { return "scripted"; }
  CompletionResult complete(const std::vector<ChatMessage>& messages,
                            const CompletionParams& params) override;

 private:
  std::unordered_map<std::string, std::string> responses_;
};

// Client for the chat-completions wire format.
class HttpChatProvider final : public LlmProvider {
 public:
  HttpChatProvider(std::string endpoint, std::string api_key, int timeout_seconds = 120);
  std::string identity() const override { return "http"; }
  CompletionResult complete(const std::vector<ChatMessage>& messages,
                            const CompletionParams& params) override;

 private:
  std::string endpoint_;
  std::string api_key_;
  int timeout_seconds_;
};

class LlmGateway {
 public:
  LlmGateway(std::shared_ptr<LlmProvider> provider, CompletionParams defaults,
             RetryPolicy retry = {});

  // Messages must be non-empty and end with a user turn. Records usage in
  // the gateway ledger and, when given, in `question_ledger`.
  CompletionResult complete(const std::vector<ChatMessage>& messages, Phase phase,
                            UsageLedger* question_ledger = nullptr);

  const UsageLedger& ledger() const noexcept { return ledger_; }
  const CompletionParams& params() const noexcept { return defaults_; }

 private:
  std::shared_ptr<LlmProvider> provider_;
  CompletionParams defaults_;
  RetryPolicy retry_;
  UsageLedger ledger_;
};

}  // namespace karpa
