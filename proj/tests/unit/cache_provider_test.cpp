#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sekg/error.hpp"
#include "sekg/provider.hpp"
#include "sekg/replay_cache.hpp"
#include "sekg/text.hpp"
#include "test_util.hpp"

namespace sekg {
namespace {

using nlohmann::json;
using std::chrono::milliseconds;

TEST(ReplayCache, KeyIsSha256OfModelNulRequest) {
  EXPECT_EQ(ReplayCache::key("m", "req"), sha256_hex(std::string("m\0req", 5)));
  EXPECT_NE(ReplayCache::key("ab", "c"), ReplayCache::key("a", "bc"));
}

TEST(ReplayCache, GetPutAndCounters) {
  testing::TempDir dir;
  ReplayCache cache(dir / "cache");
  EXPECT_FALSE(cache.get("m", "p"));
  EXPECT_EQ(cache.put("m", "p", "response bytes\n"), "response bytes\n");
  EXPECT_EQ(cache.get("m", "p"), "response bytes\n");
  EXPECT_EQ(cache.get("other", "p"), std::nullopt);
  EXPECT_EQ(cache.hits(), 1u);
  EXPECT_EQ(cache.misses(), 2u);
  EXPECT_TRUE(std::filesystem::exists(cache.path_for("m", "p")));
  EXPECT_EQ(cache.path_for("m", "p").filename().string(), ReplayCache::key("m", "p") + ".txt");
}

TEST(ReplayCache, EntriesAreNeverOverwritten) {
  testing::TempDir dir;
  ReplayCache cache(dir.path());
  cache.put("m", "p", "first");
  EXPECT_EQ(cache.put("m", "p", "second"), "first");
  EXPECT_EQ(read_file(cache.path_for("m", "p").string()), "first");
}

TEST(ReplayCache, ConcurrentPutsAgreeOnOneValue) {
  testing::TempDir dir;
  ReplayCache cache(dir.path());
  std::vector<std::string> seen(16);
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < 16; ++t) {
      pool.emplace_back([&, t] {
        for (int k = 0; k < 50; ++k) cache.put("m", "p" + std::to_string(k), "v" + std::to_string(t));
        seen[t] = *cache.get("m", "p0");
      });
    }
  }
  for (const auto& s : seen) EXPECT_EQ(s, seen[0]);
  EXPECT_EQ(std::distance(std::filesystem::directory_iterator(dir.path()), {}), 50);
}

TEST(Retry, BackoffSequence) {
  RetryPolicy p;
  p.initial_backoff = milliseconds{100};
  p.multiplier = 3.0;
  EXPECT_EQ(p.backoff_before(0), milliseconds{0});
  EXPECT_EQ(p.backoff_before(1), milliseconds{100});
  EXPECT_EQ(p.backoff_before(2), milliseconds{300});
  EXPECT_EQ(p.backoff_before(3), milliseconds{900});
}

TEST(Retry, RetriesRetryableUntilSuccess) {
  RetryPolicy p;
  p.attempts = 4;
  p.initial_backoff = milliseconds{10};
  std::vector<milliseconds> waits;
  p.sleep = [&](milliseconds d) { waits.push_back(d); };
  int calls = 0;
  const int v = with_retry(p, [&] {
    if (++calls < 3) throw ProviderError("flaky", true);
    return 42;
  });
  EXPECT_EQ(v, 42);
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(waits, (std::vector<milliseconds>{milliseconds{10}, milliseconds{20}}));
}

TEST(Retry, ExhaustionRethrowsLastError) {
  int calls = 0;
  EXPECT_THROW(with_retry(testing::no_sleep_retry(3),
                          [&]() -> int {
                            ++calls;
                            throw ProviderError("down", true);
                          }),
               ProviderError);
  EXPECT_EQ(calls, 3);
}

TEST(Retry, NonRetryableAndForeignErrorsEscapeImmediately) {
  int calls = 0;
  EXPECT_THROW(with_retry(testing::no_sleep_retry(5),
                          [&]() -> int {
                            ++calls;
                            throw ProviderError("bad request", false);
                          }),
               ProviderError);
  EXPECT_EQ(calls, 1);
  EXPECT_THROW(with_retry(testing::no_sleep_retry(5), []() -> int { throw ConfigError("no key"); }), ConfigError);
}

// Local stand-in for the completion and embedding services.
class FakeService {
 public:
  FakeService() {
    server_.Post("/complete", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth = req.get_header_value("Authorization");
      const int status = next_status.exchange(200);
      if (status != 200) {
        res.status = status;
        return;
      }
      const auto body = json::parse(req.body);
      res.set_content(json{{"text", body.at("model").get<std::string>() + ":" + body.at("prompt").get<std::string>()}}.dump(),
                      "application/json");
    });
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      json vecs = json::array();
      for (const auto& t : body.at("input")) vecs.push_back({static_cast<double>(t.get<std::string>().size()), 1.0});
      if (short_reply) vecs.erase(vecs.begin());
      res.set_content(json{{"embeddings", vecs}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::jthread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeService() { server_.stop(); }

  HttpEndpoint endpoint(const std::string& path, const std::string& env) const {
    return {"http://127.0.0.1:" + std::to_string(port_) + path, env, milliseconds{5000}};
  }

  std::string last_auth;
  std::atomic<int> next_status{200};
  bool short_reply = false;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::jthread thread_;
};

TEST(HttpProviders, CompletionSendsBearerToken) {
  FakeService svc;
  ::setenv("SEKG_TEST_KEY", "secret", 1);
  HttpLLMProvider llm(svc.endpoint("/complete", "SEKG_TEST_KEY"));
  EXPECT_EQ(llm.complete("m1", "hello"), "m1:hello");
  EXPECT_EQ(svc.last_auth, "Bearer secret");
}

TEST(HttpProviders, StatusCodesMapToRetryability) {
  FakeService svc;
  ::setenv("SEKG_TEST_KEY", "secret", 1);
  HttpLLMProvider llm(svc.endpoint("/complete", "SEKG_TEST_KEY"));
  for (const auto& [status, retryable] : std::vector<std::pair<int, bool>>{{429, true}, {500, true}, {503, true}, {400, false}}) {
    svc.next_status = status;
    try {
      llm.complete("m", "p");
      FAIL() << status;
    } catch (const ProviderError& e) {
      EXPECT_EQ(e.retryable(), retryable) << status;
    }
  }
}

TEST(HttpProviders, RetryRecoversFromTransient503) {
  FakeService svc;
  ::setenv("SEKG_TEST_KEY", "secret", 1);
  HttpLLMProvider llm(svc.endpoint("/complete", "SEKG_TEST_KEY"));
  svc.next_status = 503;
  EXPECT_EQ(with_retry(testing::no_sleep_retry(2), [&] { return llm.complete("m", "p"); }), "m:p");
}

TEST(HttpProviders, MissingKeyIsConfigError) {
  FakeService svc;
  ::unsetenv("SEKG_TEST_ABSENT_KEY");
  HttpLLMProvider llm(svc.endpoint("/complete", "SEKG_TEST_ABSENT_KEY"));
  EXPECT_THROW(llm.complete("m", "p"), ConfigError);
  HttpLLMProvider unconfigured(HttpEndpoint{});
  EXPECT_THROW(unconfigured.complete("m", "p"), ConfigError);
}

TEST(HttpProviders, ConnectionRefusedIsRetryable) {
  ::setenv("SEKG_TEST_KEY", "secret", 1);
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpLLMProvider llm({"http://127.0.0.1:" + std::to_string(port) + "/complete", "SEKG_TEST_KEY", milliseconds{500}});
  try {
    llm.complete("m", "p");
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_TRUE(e.retryable());
  }
}

TEST(HttpProviders, EmbeddingsOnePerInput) {
  FakeService svc;
  ::setenv("SEKG_TEST_KEY", "secret", 1);
  HttpEmbeddingProvider emb(svc.endpoint("/embed", "SEKG_TEST_KEY"));
  const auto v = emb.embed("e", {"a", "bbb"});
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[1], (std::vector<double>{3.0, 1.0}));
  svc.short_reply = true;
  EXPECT_THROW(emb.embed("e", {"a", "b"}), ProviderError);
}

}  // namespace
}  // namespace sekg
