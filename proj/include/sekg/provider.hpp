#pragma once

// Provider contracts for completion and embedding services, their HTTP
// bindings, and the shared retry policy.

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "sekg/error.hpp"

namespace sekg {

class LLMProvider {
 public:
  virtual ~LLMProvider() = default;

  /// Throws ProviderError (retryable for transport failures) or ConfigError.
  virtual std::string complete(const std::string& model_id, const std::string& prompt) = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  /// One vector per input text, in input order.
  virtual std::vector<std::vector<double>> embed(const std::string& model_id,
                                                 const std::vector<std::string>& texts) = 0;
};

struct HttpEndpoint {
  std::string url;          // e.g. http://localhost:8080/v1/complete
  std::string api_key_env;  // name of the env var holding the bearer token
  std::chrono::milliseconds timeout{60'000};
};

/// POST `{"model": ..., "prompt": ...}` -> `{"text": ...}` with bearer auth.
/// A missing API key is reported as a ConfigError at call time so that a
/// fully populated replay cache needs no credentials.
class HttpLLMProvider final : public LLMProvider {
 public:
  explicit HttpLLMProvider(HttpEndpoint endpoint);
  std::string complete(const std::string& model_id, const std::string& prompt) override;

 private:
  HttpEndpoint endpoint_;
};

/// POST `{"model": ..., "input": [...]}` -> `{"embeddings": [[...], ...]}`.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpEndpoint endpoint);
  std::vector<std::vector<double>> embed(const std::string& model_id,
                                         const std::vector<std::string>& texts) override;

 private:
  HttpEndpoint endpoint_;
};

/// Exponential backoff: attempt k (0-based) waits initial_backoff * multiplier^(k-1)
/// before running; the first attempt runs immediately.
struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;

  using Sleeper = std::function<void(std::chrono::milliseconds)>;
  Sleeper sleep;  // empty: std::this_thread::sleep_for

  std::chrono::milliseconds backoff_before(int attempt) const;
};

void sleep_for(std::chrono::milliseconds d);

/// Runs `fn` until it succeeds, a non-retryable error escapes, or attempts
/// are exhausted (the last retryable ProviderError is rethrown).
template <typename F>
auto with_retry(const RetryPolicy& policy, F&& fn) -> decltype(fn()) {
  const int attempts = policy.attempts < 1 ? 1 : policy.attempts;
  for (int k = 0;; ++k) {
    if (k > 0) {
      const auto wait = policy.backoff_before(k);
      if (policy.sleep) {
        policy.sleep(wait);
      } else {
        sleep_for(wait);
      }
    }
    try {
      return fn();
    } catch (const ProviderError& e) {
      if (!e.retryable() || k + 1 >= attempts) throw;
    }
  }
}


}  // namespace sekg
