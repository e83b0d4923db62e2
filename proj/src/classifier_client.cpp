#include "safesample/classifier_client.hpp"

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "safesample/error.hpp"
#include "safesample/hash.hpp"

namespace safesample {

using nlohmann::json;

std::string_view to_string(TaskKind t) noexcept {
  switch (t) {
    case TaskKind::categories: return "categories";
    case TaskKind::behavior: return "behavior";
    case TaskKind::rewrite: return "rewrite";
  }
  return "";
}

std::optional<TaskKind> parse_task(std::string_view s) noexcept {
  for (auto t : {TaskKind::categories, TaskKind::behavior, TaskKind::rewrite}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

std::string content_key(TaskKind task, std::string_view instruction, std::string_view response) {
  return Sha256().field(to_string(task)).field(instruction).field(response).hex_digest();
}

json ClassifierRequest::to_json() const {
  json items_json = json::array();
  for (const auto& item : items) {
    json j{{"id", item.id}, {"instruction", item.instruction}, {"response", item.response}};
    if (!item.prompt.empty()) j["prompt"] = item.prompt;
    items_json.push_back(std::move(j));
  }
  return json{{"task", std::string(to_string(task))}, {"items", items_json}, {"taxonomy", taxonomy}};
}

ClassifierResponse ClassifierResponse::from_json(const json& body) {
  if (!body.is_object() || !body.contains("results") || !body["results"].is_array()) {
    throw ClientError("classifier response lacks a \"results\" array");
  }
  ClassifierResponse out;
  for (const auto& r : body["results"]) {
    if (!r.is_object() || !r.contains("id") || !r["id"].is_string()) {
      throw ClientError("classifier result without a string \"id\"");
    }
    json payload = r;
    payload.erase("id");
    out.results[r["id"].get<std::string>()] = std::move(payload);
  }
  if (auto it = body.find("usage"); it != body.end() && it->is_object()) {
    out.usage.input_tokens = it->value("input_tokens", std::size_t{0});
    out.usage.output_tokens = it->value("output_tokens", std::size_t{0});
  }
  return out;
}

// ---------------------------------------------------------------------------
// HTTP

HttpClassifierClient::HttpClassifierClient(HttpClientConfig config) : config_(std::move(config)) {
  const auto& url = config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint is not a URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (config_.max_batch == 0) config_.max_batch = 1;
  if (config_.retry.max_attempts < 1) config_.retry.max_attempts = 1;
}

HttpClassifierClient HttpClassifierClient::from_environment(const std::string& endpoint_env,
                                                            const std::string& token_env,
                                                            HttpClientConfig base) {
  const char* endpoint = std::getenv(endpoint_env.c_str());
  if (endpoint == nullptr || *endpoint == '\0') {
    throw ClientError("endpoint variable " + endpoint_env + " is not set");
  }
  base.endpoint = endpoint;
  if (!token_env.empty()) {
    const char* token = std::getenv(token_env.c_str());
    if (token == nullptr || *token == '\0') {
      throw ClientError("auth token variable " + token_env + " is not set");
    }
    base.auth_token = token;
  }
  return HttpClassifierClient(std::move(base));
}

ClassifierResponse HttpClassifierClient::classify(const ClassifierRequest& request) {
  httplib::Client cli(scheme_host_port_);
  cli.set_connection_timeout(config_.timeout);
  cli.set_read_timeout(config_.timeout);
  cli.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.auth_token.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.auth_token);
  }
  const std::string body = request.to_json().dump();

  auto backoff = config_.retry.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * config_.retry.multiplier));
    }
    ++calls_;
    auto res = cli.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ClientError("classifier endpoint returned HTTP " + std::to_string(res->status) + ": " +
                        res->body.substr(0, 200));
    }
    json parsed;
    try {
      parsed = json::parse(res->body);
    } catch (const json::exception& ex) {
      throw ClientError(std::string("classifier response is not JSON: ") + ex.what());
    }
    return ClassifierResponse::from_json(parsed);
  }
  throw ClientError("classifier endpoint unreachable after " +
                    std::to_string(config_.retry.max_attempts) + " attempts (" + last_error + ")");
}

// ---------------------------------------------------------------------------
// Mock

MockClassifier::MockClassifier() : MockClassifier(&MockClassifier::default_response) {}

MockClassifier::MockClassifier(Responder responder, std::size_t max_batch)
    : responder_(std::move(responder)), max_batch_(max_batch == 0 ? 1 : max_batch) {}

json MockClassifier::default_response(TaskKind task, const ClassifierItem& item,
                                      const std::vector<std::string>& taxonomy) {
  const std::string h = Sha256().field(item.instruction).field(item.response).hex_digest();
  const std::uint64_t bits = std::stoull(h.substr(0, 15), nullptr, 16);
  switch (task) {
    case TaskKind::categories:
      if (taxonomy.empty()) return json{{"categories", json::array()}};
      return json{{"categories", {taxonomy[bits % taxonomy.size()]}}};
    case TaskKind::behavior:
      return json{{"harmful", (bits & 1U) != 0}, {"refusal", (bits & 2U) != 0}};
    case TaskKind::rewrite:
      return json{{"rewritten", std::string(kRefusal)}};
  }
  return json::object();
}

ClassifierResponse MockClassifier::classify(const ClassifierRequest& request) {
  ++calls_;
  ClassifierResponse out;
  for (const auto& item : request.items) {
    ++items_;
    out.results[item.id] = responder_(request.task, item, request.taxonomy);
    out.usage.input_tokens += (item.instruction.size() + item.response.size() + item.prompt.size()) / 4 + 1;
    out.usage.output_tokens += 8;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Record / replay

RecordingClient::RecordingClient(ClassifierClient& inner, std::filesystem::path transcript)
    : inner_(inner), transcript_(std::move(transcript)) {}

ClassifierResponse RecordingClient::classify(const ClassifierRequest& request) {
  auto response = inner_.classify(request);
  std::lock_guard lock(mutex_);
  std::ofstream out(transcript_, std::ios::app | std::ios::binary);
  if (!out) throw ConfigError("cannot append to transcript " + transcript_.string());
  for (const auto& item : request.items) {
    auto it = response.results.find(item.id);
    if (it == response.results.end()) continue;
    json line{{"key", content_key(request.task, item.instruction, item.response)},
              {"task", std::string(to_string(request.task))},
              {"result", it->second}};
    out << line.dump() << '\n';
  }
  return response;
}

ReplayClient::ReplayClient(const std::filesystem::path& transcript) {
  std::ifstream in(transcript, std::ios::binary);
  if (!in) throw ConfigError("cannot open transcript " + transcript.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      answers_[j.at("key").get<std::string>()] = j.at("result");
    } catch (const json::exception& ex) {
      throw ParseError(transcript.string(), line_no, ex.what());
    }
  }
}

ClassifierResponse ReplayClient::classify(const ClassifierRequest& request) {
  ++calls_;
  ClassifierResponse out;
  for (const auto& item : request.items) {
    auto it = answers_.find(content_key(request.task, item.instruction, item.response));
    if (it == answers_.end()) {
      throw ClientError("transcript has no answer for item '" + item.id + "'");
    }
    out.results[item.id] = it->second;
  }
  return out;
}

}  // namespace safesample
