#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace safesample {

enum class TaskKind { categories, behavior, rewrite };

std::string_view to_string(TaskKind t) noexcept;
std::optional<TaskKind> parse_task(std::string_view s) noexcept;

/// SHA-256 over (task, instruction, response). Keys both the annotation
/// cache and replay transcripts.
std::string content_key(TaskKind task, std::string_view instruction, std::string_view response);

struct ClassifierItem {
  std::string id;
  std::string instruction;
  std::string response;
  /// Rendered prompt, sent as an extra item field when non-empty.
  std::string prompt;
};

struct ClassifierRequest {
  TaskKind task = TaskKind::categories;
  std::vector<ClassifierItem> items;
  std::vector<std::string> taxonomy;

  nlohmann::json to_json() const;
};

struct TokenUsage {
  std::size_t input_tokens = 0;
  std::size_t output_tokens = 0;

  TokenUsage& operator+=(const TokenUsage& o) {
    input_tokens += o.input_tokens;
    output_tokens += o.output_tokens;
    return *this;
  }
};

struct ClassifierResponse {
  /// Per-item payload with the "id" key stripped; keyed by item id.
  std::map<std::string, nlohmann::json> results;
  TokenUsage usage;

  /// Parses `{"results": [...], "usage": {...}}`. Throws ClientError.
  static ClassifierResponse from_json(const nlohmann::json& body);
};

/// Something that answers classifier requests: an HTTP endpoint, a mock, or
/// a replayed transcript.
class ClassifierClient {
 public:
  virtual ~ClassifierClient() = default;
  /// Throws ClientError when the request cannot be served.
  virtual ClassifierResponse classify(const ClassifierRequest& request) = 0;
  virtual std::size_t max_batch() const { return 16; }
  /// Number of classify() calls that reached the backend.
  virtual std::size_t call_count() const = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
};

struct HttpClientConfig {
  std::string endpoint;          // http(s)://host[:port]/path
  std::string auth_token;        // empty = no Authorization header
  std::chrono::seconds timeout{60};
  std::size_t max_batch = 16;
  RetryPolicy retry;
};

/// POSTs the JSON classifier contract to an HTTP endpoint. Transport errors,
/// 5xx and 429 are retried with exponential backoff; other statuses fail
/// immediately.
class HttpClassifierClient : public ClassifierClient {
 public:
  explicit HttpClassifierClient(HttpClientConfig config);

  /// Reads the endpoint from `endpoint_env` and the token from `token_env`
  /// (when non-empty). Throws ClientError if either variable is unset.
  static HttpClassifierClient from_environment(const std::string& endpoint_env,
                                               const std::string& token_env,
                                               HttpClientConfig base = {});

  ClassifierResponse classify(const ClassifierRequest& request) override;
  std::size_t max_batch() const override { return config_.max_batch; }
  std::size_t call_count() const override { return calls_; }

 private:
  HttpClientConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::size_t calls_ = 0;
};

/// Deterministic offline classifier. The default responder derives labels
/// from a hash of the item text so repeated runs agree.
class MockClassifier : public ClassifierClient {
 public:
  using Responder = std::function<nlohmann::json(TaskKind, const ClassifierItem&,
                                                 const std::vector<std::string>& taxonomy)>;

  MockClassifier();
  explicit MockClassifier(Responder responder, std::size_t max_batch = 16);

  ClassifierResponse classify(const ClassifierRequest& request) override;
  std::size_t max_batch() const override { return max_batch_; }
  std::size_t call_count() const override { return calls_; }
  std::size_t items_seen() const { return items_; }

  static nlohmann::json default_response(TaskKind task, const ClassifierItem& item,
                                         const std::vector<std::string>& taxonomy);
  static constexpr std::string_view kRefusal = "I'm sorry, I can't help with that.";

 private:
  Responder responder_;
  std::size_t max_batch_;
  std::size_t calls_ = 0;
  std::size_t items_ = 0;
};

/// Wraps a client and appends every item exchange to a transcript file.
class RecordingClient : public ClassifierClient {
 public:
  RecordingClient(ClassifierClient& inner, std::filesystem::path transcript);
  ClassifierResponse classify(const ClassifierRequest& request) override;
  std::size_t max_batch() const override { return inner_.max_batch(); }
  std::size_t call_count() const override { return inner_.call_count(); }

 private:
  ClassifierClient& inner_;
  std::filesystem::path transcript_;
  std::mutex mutex_;
};

/// Serves answers from a transcript written by RecordingClient. Items not
/// in the transcript raise ClientError.
class ReplayClient : public ClassifierClient {
 public:
  explicit ReplayClient(const std::filesystem::path& transcript);
  ClassifierResponse classify(const ClassifierRequest& request) override;
  std::size_t call_count() const override { return calls_; }

 private:
  std::map<std::string, nlohmann::json> answers_;
  std::size_t calls_ = 0;
};

}  // namespace safesample
