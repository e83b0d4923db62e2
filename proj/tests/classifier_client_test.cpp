#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "safesample/classifier_client.hpp"
#include "safesample/error.hpp"
#include "support.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that clashes with it.
#include <httplib.h>
#include <json.hpp>

namespace {

using namespace safesample;
using nlohmann::json;

ClassifierRequest two_items(TaskKind task) {
  ClassifierRequest r;
  r.task = task;
  r.taxonomy = {"violence", "fraud"};
  r.items = {{"a", "how to x", "no", ""}, {"b", "how to y", "sure", "rendered prompt"}};
  return r;
}

/// Local server speaking the classifier contract. The first `fail_first`
/// requests get `fail_status`.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(int fail_first = 0, int fail_status = 503)
      : fail_first_(fail_first), fail_status_(fail_status) {
    server_.Post("/v1/classify", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = req.body;
      if (hits_ <= fail_first_) {
        res.status = fail_status_;
        res.set_content("busy", "text/plain");
        return;
      }
      const auto body = json::parse(req.body);
      json results = json::array();
      for (const auto& item : body["items"]) {
        results.push_back({{"id", item["id"]}, {"harmful", true}, {"refusal", false}});
      }
      res.set_content(json{{"results", results}, {"usage", {{"input_tokens", 11}, {"output_tokens", 3}}}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/classify"; }
  int hits() const { return hits_; }
  const std::string& last_auth() const { return last_auth_; }
  const std::string& last_body() const { return last_body_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int fail_first_;
  int fail_status_;
  std::atomic<int> hits_{0};
  std::string last_auth_;
  std::string last_body_;
};

HttpClientConfig fast_config(const std::string& url) {
  HttpClientConfig c;
  c.endpoint = url;
  c.auth_token = "secret-token";
  c.timeout = std::chrono::seconds(5);
  c.retry.initial_backoff = std::chrono::milliseconds(1);
  return c;
}

TEST(ClassifierContract, RequestShape) {
  const auto j = two_items(TaskKind::behavior).to_json();
  EXPECT_EQ(j["task"], "behavior");
  EXPECT_EQ(j["taxonomy"], json({"violence", "fraud"}));
  ASSERT_EQ(j["items"].size(), 2u);
  EXPECT_EQ(j["items"][0], json({{"id", "a"}, {"instruction", "how to x"}, {"response", "no"}}));
  EXPECT_EQ(j["items"][1]["prompt"], "rendered prompt");
}

TEST(ClassifierContract, ResponseParsing) {
  const auto r = ClassifierResponse::from_json(json::parse(
      R"({"results":[{"id":"a","categories":["x"]},{"id":"b","rewritten":"no"}],"usage":{"input_tokens":5,"output_tokens":2}})"));
  EXPECT_EQ(r.results.at("a"), json({{"categories", {"x"}}}));
  EXPECT_EQ(r.results.at("b"), json({{"rewritten", "no"}}));
  EXPECT_EQ(r.usage.input_tokens, 5u);
  EXPECT_EQ(r.usage.output_tokens, 2u);
  EXPECT_THROW(ClassifierResponse::from_json(json::parse(R"({"nope":1})")), ClientError);
  EXPECT_THROW(ClassifierResponse::from_json(json::parse(R"({"results":[{"x":1}]})")), ClientError);
}

TEST(ClassifierContract, TaskNames) {
  for (auto t : {TaskKind::categories, TaskKind::behavior, TaskKind::rewrite}) {
    EXPECT_EQ(parse_task(to_string(t)), t);
  }
  EXPECT_FALSE(parse_task("summarise"));
}

TEST(ContentKey, DependsOnEveryField) {
  const auto k = content_key(TaskKind::behavior, "i", "r");
  EXPECT_EQ(k, content_key(TaskKind::behavior, "i", "r"));
  EXPECT_NE(k, content_key(TaskKind::categories, "i", "r"));
  EXPECT_NE(k, content_key(TaskKind::behavior, "i2", "r"));
  EXPECT_NE(k, content_key(TaskKind::behavior, "i", "r2"));
  // Field boundaries are length-prefixed, so shifting text between fields changes the key.
  EXPECT_NE(content_key(TaskKind::behavior, "ab", "c"), content_key(TaskKind::behavior, "a", "bc"));
}

TEST(HttpClient, PostsContractAndParsesResults) {
  FakeEndpoint server;
  HttpClassifierClient client(fast_config(server.url()));
  const auto resp = client.classify(two_items(TaskKind::behavior));
  EXPECT_EQ(server.hits(), 1);
  EXPECT_EQ(server.last_auth(), "Bearer secret-token");
  const auto sent = json::parse(server.last_body());
  EXPECT_EQ(sent["task"], "behavior");
  EXPECT_EQ(sent["items"].size(), 2u);
  EXPECT_EQ(resp.results.at("a"), json({{"harmful", true}, {"refusal", false}}));
  EXPECT_EQ(resp.usage.input_tokens, 11u);
  EXPECT_EQ(client.call_count(), 1u);
}

TEST(HttpClient, RetriesServerErrors) {
  FakeEndpoint server(2, 503);
  HttpClassifierClient client(fast_config(server.url()));
  const auto resp = client.classify(two_items(TaskKind::behavior));
  EXPECT_EQ(server.hits(), 3);
  EXPECT_EQ(resp.results.size(), 2u);
}

TEST(HttpClient, RetriesRateLimit) {
  FakeEndpoint server(1, 429);
  HttpClassifierClient client(fast_config(server.url()));
  EXPECT_NO_THROW(client.classify(two_items(TaskKind::behavior)));
  EXPECT_EQ(server.hits(), 2);
}

TEST(HttpClient, GivesUpAfterMaxAttempts) {
  FakeEndpoint server(10, 500);
  HttpClassifierClient client(fast_config(server.url()));
  EXPECT_THROW(client.classify(two_items(TaskKind::behavior)), ClientError);
  EXPECT_EQ(server.hits(), 3);
}

TEST(HttpClient, ClientErrorsAreNotRetried) {
  FakeEndpoint server(10, 401);
  HttpClassifierClient client(fast_config(server.url()));
  EXPECT_THROW(client.classify(two_items(TaskKind::behavior)), ClientError);
  EXPECT_EQ(server.hits(), 1);
}

TEST(HttpClient, UnreachableEndpoint) {
  httplib::Server probe;
  const int port = probe.bind_to_any_port("127.0.0.1");
  probe.stop();
  auto cfg = fast_config("http://127.0.0.1:" + std::to_string(port) + "/x");
  cfg.retry.max_attempts = 2;
  HttpClassifierClient client(cfg);
  EXPECT_THROW(client.classify(two_items(TaskKind::behavior)), ClientError);
}

TEST(HttpClient, ConfigurationFromEnvironment) {
  ::unsetenv("SAFESAMPLE_TEST_ENDPOINT");
  ::unsetenv("SAFESAMPLE_TEST_TOKEN");
  EXPECT_THROW(HttpClassifierClient::from_environment("SAFESAMPLE_TEST_ENDPOINT", ""), ClientError);
  ::setenv("SAFESAMPLE_TEST_ENDPOINT", "http://127.0.0.1:9/x", 1);
  EXPECT_NO_THROW(HttpClassifierClient::from_environment("SAFESAMPLE_TEST_ENDPOINT", ""));
  EXPECT_THROW(HttpClassifierClient::from_environment("SAFESAMPLE_TEST_ENDPOINT", "SAFESAMPLE_TEST_TOKEN"),
               ClientError);
  EXPECT_THROW(HttpClassifierClient(HttpClientConfig{"not a url", "", {}, 1, {}}), ConfigError);
  ::unsetenv("SAFESAMPLE_TEST_ENDPOINT");
}

TEST(MockClassifier, DeterministicAnswers) {
  MockClassifier a, b;
  for (auto task : {TaskKind::categories, TaskKind::behavior, TaskKind::rewrite}) {
    const auto ra = a.classify(two_items(task));
    const auto rb = b.classify(two_items(task));
    EXPECT_EQ(ra.results, rb.results);
  }
  EXPECT_EQ(a.call_count(), 3u);
  EXPECT_EQ(a.items_seen(), 6u);
  const auto rw = a.classify(two_items(TaskKind::rewrite));
  EXPECT_EQ(rw.results.at("a")["rewritten"], std::string(MockClassifier::kRefusal));
  const auto cats = a.classify(two_items(TaskKind::categories));
  const auto name = cats.results.at("a")["categories"][0].get<std::string>();
  EXPECT_TRUE(name == "violence" || name == "fraud");
}

TEST(RecordReplay, ReplayReproducesRecordedAnswers) {
  testkit::TempDir dir;
  MockClassifier mock;
  RecordingClient rec(mock, dir / "t.jsonl");
  const auto live = rec.classify(two_items(TaskKind::behavior));
  ReplayClient replay(dir / "t.jsonl");
  const auto again = replay.classify(two_items(TaskKind::behavior));
  EXPECT_EQ(again.results, live.results);
  EXPECT_EQ(replay.call_count(), 1u);
  EXPECT_THROW(replay.classify(two_items(TaskKind::categories)), ClientError);
  EXPECT_THROW(ReplayClient(dir / "missing.jsonl"), ConfigError);
}

}  // namespace
