#pragma once

#include <chrono>
#include <thread>

#include "karpa/error.hpp"

namespace karpa {

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
};

// Runs `fn`, retrying on retryable ProviderError with exponential backoff.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
  auto backoff = policy.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const ProviderError& e) {
      if (!e.retryable() || attempt >= policy.attempts) throw;
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace karpa
