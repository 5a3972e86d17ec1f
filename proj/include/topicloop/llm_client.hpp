#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "topicloop/errors.hpp"

namespace topicloop {

// ---------------------------------------------------------------------------
// Prompt templates

enum class PromptName { TopicInference, CoherenceEvaluation, PostCorrection };

std::string to_string(PromptName name);
PromptName prompt_name_from_string(const std::string& s);

struct PromptTemplate {
  PromptName name;
  std::string text;
  /// Placeholders that must be bound to a non-empty value.
  std::vector<std::string> placeholders;

  static const PromptTemplate& builtin(PromptName name);
};

using Bindings = std::map<std::string, std::string>;

/// Single-pass substitution of every {placeholder}. Braces that do not name
/// one of the template's placeholders are copied through untouched, and
/// bound values are never re-scanned. Throws ValidationError naming the first
/// placeholder that is unbound or bound to an empty string.
std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings);

/// Python-list rendering of a word list: ["a", "b"].
std::string format_word_list(std::span<const std::string> words);

/// Few-shot example blocks bound to {examples}. The defaults mirror the files
/// under data/fewshot/.
struct FewShotExamples {
  std::string topic_inference;
  std::string coherence_evaluation;
  std::string post_correction;

  static FewShotExamples defaults();
  /// Reads <dir>/<prompt name>.txt for each prompt; missing files keep the
  /// default.
  static FewShotExamples load_dir(const std::filesystem::path& dir);
  const std::string& for_prompt(PromptName name) const;
};

// ---------------------------------------------------------------------------
// Transport

struct DecodingParams {
  double temperature = 0.0;
  int max_tokens = 512;
};

struct ChatRequest {
  PromptName task = PromptName::CoherenceEvaluation;
  std::string prompt;
  /// Words the prompt is about; lets mock rules match on the payload rather
  /// than on the few-shot examples.
  std::vector<std::string> subject;
  std::string model;
  DecodingParams decoding;
};

struct ChatExchange {
  ChatRequest request;
  std::string response;
  std::chrono::milliseconds latency{0};
  int attempts = 0;
};

class Transport {
 public:
  virtual ~Transport() = default;
  /// Returns the assistant message text or throws TransportError.
  virtual std::string send(const ChatRequest& request) = 0;
};

struct HttpConfig {
  std::string base_url;  ///< scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string api_key;
  std::chrono::seconds timeout{60};

  /// TOPICLOOP_LLM_URL, TOPICLOOP_LLM_PATH, TOPICLOOP_LLM_API_KEY.
  static HttpConfig from_env();
};

/// Chat-completions over HTTP: POST {model, messages, temperature,
/// max_tokens}, read choices[0].message.content.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(HttpConfig config);
  std::string send(const ChatRequest& request) override;

  static nlohmann::json request_body(const ChatRequest& request);
  /// Throws TransportError(MalformedPayload) if the shape is wrong.
  static std::string extract_content(const std::string& body);

 private:
  HttpConfig config_;
};

/// Deterministic offline transport driven by a rule table.
///
/// Rules are tried in order; the first that fires supplies the response,
/// otherwise the default response is used. Rule fields:
///   task        optional prompt name the rule is restricted to
///   contains    string or list; fires if any is a substring of the subject
///               (or of the whole prompt when "match" is "prompt")
///   has_word    string or list; fires if any is an exact subject word
///   flag_words  list; fires if any is a subject word, and responds
///               No ["w1", ...] with the flagged words in subject order
///   respond     response text for contains/has_word rules
/// Top level: "default" (default "Yes."), "fail_first" (number of leading
/// calls that fail) and "failure" ("timeout" | "http_status" | "malformed").
class MockTransport : public Transport {
 public:
  using Handler = std::function<std::string(const ChatRequest&)>;

  explicit MockTransport(nlohmann::json rules);
  explicit MockTransport(Handler handler);
  static std::shared_ptr<MockTransport> from_file(const std::filesystem::path& path);

  std::string send(const ChatRequest& request) override;
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::string apply_rules(const ChatRequest& request) const;

  nlohmann::json rules_;
  Handler handler_;
  int fail_first_ = 0;
  TransportFailure failure_ = TransportFailure::Timeout;
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Client

struct RetryPolicy {
  /// Total attempts, including the first.
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};
};

struct ClientConfig {
  std::string model = "default";
  DecodingParams decoding;
  RetryPolicy retry;
  int max_concurrency = 4;
  std::size_t max_words_per_prompt = 20;
  /// Extra completions attempted when a verdict cannot be parsed.
  int parse_retries = 1;
  FewShotExamples examples = FewShotExamples::defaults();
};

class LlmClient {
 public:
  LlmClient(std::shared_ptr<Transport> transport, ClientConfig config = {});

  /// Sends the request, retrying transport failures with exponential
  /// backoff. Blocks while max_concurrency calls are already in flight.
  ChatExchange complete(ChatRequest request) const;

  ChatRequest make_request(PromptName task, const Bindings& bindings, std::vector<std::string> subject) const;

  const ClientConfig& config() const noexcept { return config_; }
  /// Number of complete() invocations.
  std::size_t call_count() const noexcept { return calls_.load(); }

 private:
  std::shared_ptr<Transport> transport_;
  ClientConfig config_;
  mutable std::counting_semaphore<1024> slots_;
  mutable std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Verdicts

enum class VerdictKind { Yes, No };

struct Verdict {
  VerdictKind kind = VerdictKind::Yes;
  std::vector<std::string> rejected_words;
};

/// Finds the first standalone yes/no (any case). On No, collects the quoted
/// strings of the first bracketed list that follows; straight, curly and
/// full-width quotes and brackets are accepted, and an unquoted list is split
/// on commas. Throws ParseError when neither word is present.
Verdict parse_verdict(const std::string& raw);

/// Cluster-level coherence in [0, 1]: Yes -> 1, No -> 0. A single word scores
/// 1 without a call. Empty or oversized input throws ValidationError.
double evaluate_cluster_coherence(const LlmClient& client, std::span<const std::string> words);

/// Post-correction verdict for a topic's word list, with the raw exchange.
std::pair<Verdict, ChatExchange> judge_topic_words(const LlmClient& client, std::span<const std::string> words);

// ---------------------------------------------------------------------------
// Topic distillation

struct DistillReport {
  std::vector<std::string> hallucinated;  ///< parsed words not in the input (distinct)
  std::vector<std::string> assigned;      ///< parsed words from the input (distinct)
  std::vector<std::string> missing;       ///< input words never assigned
  std::size_t duplicates = 0;             ///< occurrences beyond the first, across all groups
  std::size_t surplus_groups = 0;         ///< groups parsed beyond the requested count

  bool clean() const { return hallucinated.empty() && missing.empty() && duplicates == 0 && surplus_groups == 0; }
};

struct DistillResult {
  std::vector<std::vector<std::string>> topics;
  DistillReport report;
  std::string raw_response;
};

class DistillParseError : public ParseError {
 public:
  DistillParseError(const std::string& what, DistillResult partial)
      : ParseError(what), partial_(std::move(partial)) {}
  const DistillResult& partial() const noexcept { return partial_; }

 private:
  DistillResult partial_;
};

/// One group per response line: either a bracketed list or "label: a, b, c".
std::vector<std::vector<std::string>> parse_topic_groups(const std::string& raw);

DistillResult distill_topics(const LlmClient& client, std::span<const std::string> vocabulary, int count);

}  // namespace topicloop
