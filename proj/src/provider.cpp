#include "sekg/provider.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace sekg {

using nlohmann::json;

void sleep_for(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

std::chrono::milliseconds RetryPolicy::backoff_before(int attempt) const {
  if (attempt <= 0) return std::chrono::milliseconds{0};
  const double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, attempt - 1);
  return std::chrono::milliseconds{static_cast<std::int64_t>(ms)};
}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string api_key(const HttpEndpoint& ep) {
  const char* v = ep.api_key_env.empty() ? nullptr : std::getenv(ep.api_key_env.c_str());
  if (!v || !*v) {
    throw ConfigError("environment variable " +
                      (ep.api_key_env.empty() ? std::string("<unset>") : ep.api_key_env) +
                      " is not set and the replay cache has no entry for this request");
  }
  return v;
}

json post_json(const HttpEndpoint& ep, const json& body) {
  if (ep.url.empty()) throw ConfigError("provider endpoint is not configured");
  const auto key = api_key(ep);
  const auto [origin, path] = split_url(ep.url);

  httplib::Client client(origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(ep.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(ep.timeout - secs);
  client.set_connection_timeout(secs.count(), static_cast<time_t>(usecs.count()));
  client.set_read_timeout(secs.count(), static_cast<time_t>(usecs.count()));
  client.set_bearer_token_auth(key);

  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw ProviderError("transport failure contacting " + ep.url + ": " + httplib::to_string(res.error()),
                        true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw ProviderError("provider returned HTTP " + std::to_string(res->status), true);
  }
  if (res->status != 200) {
    throw ProviderError("provider returned HTTP " + std::to_string(res->status) + ": " + res->body,
                        false);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception&) {
    throw ProviderError("provider response is not JSON", false);
  }
}

}  // namespace

HttpLLMProvider::HttpLLMProvider(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::string HttpLLMProvider::complete(const std::string& model_id, const std::string& prompt) {
  const auto reply = post_json(endpoint_, json{{"model", model_id}, {"prompt", prompt}});
  const auto it = reply.find("text");
  if (it == reply.end() || !it->is_string()) {
    throw ProviderError("completion response lacks a string 'text' field", false);
  }
  return it->get<std::string>();
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEndpoint endpoint)
    : endpoint_(std::move(endpoint)) {}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(const std::string& model_id,
                                                              const std::vector<std::string>& texts) {
  const auto reply = post_json(endpoint_, json{{"model", model_id}, {"input", texts}});
  const auto it = reply.find("embeddings");
  if (it == reply.end() || !it->is_array() || it->size() != texts.size()) {
    throw ProviderError("embedding response must carry one vector per input", false);
  }
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  try {
    for (const auto& v : *it) out.push_back(v.get<std::vector<double>>());
  } catch (const json::exception&) {
    throw ProviderError("embedding vectors must be numeric arrays", false);
  }
  return out;
}

}  // namespace sekg
