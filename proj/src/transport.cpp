#include <cstdlib>
#include <fstream>

#include <httplib.h>

#include "topicloop/llm_client.hpp"

namespace topicloop {

using nlohmann::json;

HttpConfig HttpConfig::from_env() {
  HttpConfig c;
  if (const char* v = std::getenv("TOPICLOOP_LLM_URL")) c.base_url = v;
  if (const char* v = std::getenv("TOPICLOOP_LLM_PATH")) c.path = v;
  if (const char* v = std::getenv("TOPICLOOP_LLM_API_KEY")) c.api_key = v;
  return c;
}

HttpTransport::HttpTransport(HttpConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw ValidationError("HTTP transport: no endpoint URL configured");
}

json HttpTransport::request_body(const ChatRequest& request) {
  return json{{"model", request.model},
              {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
              {"temperature", request.decoding.temperature},
              {"max_tokens", request.decoding.max_tokens}};
}

std::string HttpTransport::extract_content(const std::string& body) {
  try {
    const auto j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(TransportFailure::MalformedPayload, std::string("malformed chat response: ") + e.what());
  }
}

std::string HttpTransport::send(const ChatRequest& request) {
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto res = client.Post(config_.path, headers, request_body(request).dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const auto kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                          ? TransportFailure::Timeout
                          : TransportFailure::Connection;
    throw TransportError(kind, "request to " + config_.base_url + config_.path + " failed: " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300)
    throw TransportError(TransportFailure::HttpStatus, "HTTP status " + std::to_string(res->status));
  return extract_content(res->body);
}

MockTransport::MockTransport(json rules) : rules_(std::move(rules)) {
  if (!rules_.is_object()) throw FormatError("mock rules must be a JSON object");
  fail_first_ = rules_.value("fail_first", 0);
  const auto failure = rules_.value("failure", std::string("timeout"));
  if (failure == "timeout") {
    failure_ = TransportFailure::Timeout;
  } else if (failure == "http_status") {
    failure_ = TransportFailure::HttpStatus;
  } else if (failure == "malformed") {
    failure_ = TransportFailure::MalformedPayload;
  } else {
    throw FormatError("mock rules: unknown failure kind '" + failure + "'");
  }
  if (rules_.contains("rules") && !rules_.at("rules").is_array()) throw FormatError("mock rules: 'rules' must be a list");
}

MockTransport::MockTransport(Handler handler) : handler_(std::move(handler)) {}

std::shared_ptr<MockTransport> MockTransport::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open mock rules " + path.string());
  try {
    return std::make_shared<MockTransport>(json::parse(in));
  } catch (const json::exception& e) {
    throw FormatError("mock rules " + path.string() + ": " + e.what());
  }
}

std::string MockTransport::send(const ChatRequest& request) {
  const auto n = calls_.fetch_add(1);
  if (n < static_cast<std::size_t>(std::max(fail_first_, 0)))
    throw TransportError(failure_, "mock transport: scripted failure " + std::to_string(n + 1));
  if (handler_) return handler_(request);
  return apply_rules(request);
}

namespace {

std::vector<std::string> string_or_list(const json& j) {
  if (j.is_string()) return {j.get<std::string>()};
  return j.get<std::vector<std::string>>();
}

}  // namespace

std::string MockTransport::apply_rules(const ChatRequest& request) const {
  const std::string subject_text = format_word_list(request.subject);
  if (rules_.contains("rules")) {
    for (const auto& rule : rules_.at("rules")) {
      if (rule.contains("task") && prompt_name_from_string(rule.at("task").get<std::string>()) != request.task)
        continue;
      if (rule.contains("flag_words")) {
        const auto flags = string_or_list(rule.at("flag_words"));
        std::vector<std::string> hits;
        for (const auto& w : request.subject)
          if (std::find(flags.begin(), flags.end(), w) != flags.end() &&
              std::find(hits.begin(), hits.end(), w) == hits.end())
            hits.push_back(w);
        if (!hits.empty()) return "No " + format_word_list(hits);
        continue;
      }
      bool fired = false;
      if (rule.contains("contains")) {
        const auto& haystack = rule.value("match", std::string("subject")) == "prompt" ? request.prompt : subject_text;
        for (const auto& needle : string_or_list(rule.at("contains")))
          fired = fired || haystack.find(needle) != std::string::npos;
      }
      if (rule.contains("has_word")) {
        for (const auto& w : string_or_list(rule.at("has_word")))
          fired = fired || std::find(request.subject.begin(), request.subject.end(), w) != request.subject.end();
      }
      if (fired) return rule.value("respond", std::string("Yes."));
    }
  }
  return rules_.value("default", std::string("Yes."));
}

}  // namespace topicloop
