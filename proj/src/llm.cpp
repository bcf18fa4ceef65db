#include "karpa/llm.hpp"

#include <fstream>

#include <json.hpp>

#include "karpa/digest.hpp"
#include "karpa/error.hpp"
#include "karpa/http.hpp"

namespace karpa {

std::string to_string(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::kInitialPlanning: return "initial_planning";
    case Phase::kReplanning: return "replanning";
    case Phase::kReasoning: return "reasoning";
  }
  return "?";
}

UsageCounts& UsageCounts::operator+=(const UsageCounts& o) {
  calls += o.calls;
  prompt_tokens += o.prompt_tokens;
  completion_tokens += o.completion_tokens;
  estimated_calls += o.estimated_calls;
  return *this;
}

UsageSnapshot& UsageSnapshot::operator+=(const UsageSnapshot& o) {
  total += o.total;
  for (std::size_t i = 0; i < kPhaseCount; ++i) by_phase[i] += o.by_phase[i];
  return *this;
}

void UsageLedger::record(Phase phase, const CompletionResult& result) {
  UsageCounts delta{1, result.prompt_tokens, result.completion_tokens,
                    result.tokens_estimated ? 1u : 0u};
  std::lock_guard lock(mu_);
  data_.total += delta;
  data_.by_phase[static_cast<std::size_t>(phase)] += delta;
}

void UsageLedger::merge(const UsageSnapshot& other) {
  std::lock_guard lock(mu_);
  data_ += other;
}

UsageSnapshot UsageLedger::snapshot() const {
  std::lock_guard lock(mu_);
  return data_;
}

std::uint64_t estimate_tokens(std::string_view text) {
  std::uint64_t code_points = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++code_points;
  }
  return (code_points + 3) / 4;
}

std::string message_digest(const std::vector<ChatMessage>& messages) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : messages) arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return sha256_hex(arr.dump());
}

ScriptedLlmProvider ScriptedLlmProvider::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scripted LLM fixture: " + path);
  ScriptedLlmProvider provider;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      provider.add(rec.at("digest").get<std::string>(), rec.at("response_text").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return provider;
}

void ScriptedLlmProvider::add(std::string digest, std::string response_text) {
  responses_[std::move(digest)] = std::move(response_text);
}

CompletionResult ScriptedLlmProvider::complete(const std::vector<ChatMessage>& messages,
                                               const CompletionParams&) {
  const auto digest = message_digest(messages);
  auto it = responses_.find(digest);
  if (it == responses_.end()) {
    throw ProviderError("scripted provider has no fixture for digest " + digest, false);
  }
  CompletionResult r;
  r.text = it->second;
  r.tokens_estimated = true;
  return r;
}

HttpChatProvider::HttpChatProvider(std::string endpoint, std::string api_key, int timeout_seconds)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {}

CompletionResult HttpChatProvider::complete(const std::vector<ChatMessage>& messages,
                                            const CompletionParams& params) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  nlohmann::json body = {{"model", params.model}, {"messages", msgs}, {"temperature", params.temperature}};
  if (params.max_output > 0) body["max_tokens"] = params.max_output;
  const auto reply = http_post_json(endpoint_, body, api_key_, timeout_seconds_);

  CompletionResult r;
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    r.text = content.is_null() ? std::string() : content.get<std::string>();
    if (reply.contains("usage") && reply["usage"].is_object()) {
      r.prompt_tokens = reply["usage"].value("prompt_tokens", 0ULL);
      r.completion_tokens = reply["usage"].value("completion_tokens", 0ULL);
    } else {
      r.tokens_estimated = true;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed chat response: ") + e.what(), false);
  }
  return r;
}

LlmGateway::LlmGateway(std::shared_ptr<LlmProvider> provider, CompletionParams defaults,
                       RetryPolicy retry)
    : provider_(std::move(provider)), defaults_(std::move(defaults)), retry_(retry) {}

CompletionResult LlmGateway::complete(const std::vector<ChatMessage>& messages, Phase phase,
                                      UsageLedger* question_ledger) {
  if (messages.empty()) throw ContractError("complete: no messages");
  if (messages.back().role != Role::kUser) throw ContractError("complete: last message must be from the user");
  for (const auto& m : messages) {
    if (m.role != Role::kSystem && m.content.empty()) {
      throw ContractError("complete: empty user/assistant message");
    }
  }
  auto result = with_retries(retry_, [&] { return provider_->complete(messages, defaults_); });
  if (result.text.empty()) throw ProviderError("empty completion", false);
  if (result.tokens_estimated) {
    std::string prompt;
    for (const auto& m : messages) prompt += m.content;
    result.prompt_tokens = estimate_tokens(prompt);
    result.completion_tokens = estimate_tokens(result.text);
  }
  ledger_.record(phase, result);
  if (question_ledger) question_ledger->record(phase, result);
  return result;
}

}  // namespace karpa
