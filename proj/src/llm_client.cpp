#include <algorithm>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "topicloop/llm_client.hpp"

namespace topicloop {

LlmClient::LlmClient(std::shared_ptr<Transport> transport, ClientConfig config)
    : transport_(std::move(transport)),
      config_(std::move(config)),
      slots_(std::clamp(config_.max_concurrency, 1, 1024)) {
  if (!transport_) throw ValidationError("LlmClient: no transport configured");
  if (config_.retry.max_attempts < 1) throw ValidationError("LlmClient: max_attempts must be >= 1");
}

ChatRequest LlmClient::make_request(PromptName task, const Bindings& bindings, std::vector<std::string> subject) const {
  ChatRequest req;
  req.task = task;
  req.prompt = render_prompt(PromptTemplate::builtin(task), bindings);
  req.subject = std::move(subject);
  req.model = config_.model;
  req.decoding = config_.decoding;
  return req;
}

ChatExchange LlmClient::complete(ChatRequest request) const {
  ++calls_;
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};

  ChatExchange ex;
  ex.request = std::move(request);
  const auto start = std::chrono::steady_clock::now();
  auto backoff = config_.retry.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    ex.attempts = attempt;
    try {
      ex.response = transport_->send(ex.request);
      break;
    } catch (TransportError& e) {
      if (attempt >= config_.retry.max_attempts) {
        e.set_attempts(attempt);
        throw;
      }
    }
    if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
    backoff = std::min(config_.retry.max_backoff,
                       std::chrono::milliseconds(static_cast<long long>(backoff.count() * config_.retry.multiplier)));
  }
  ex.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  return ex;
}

namespace {

/// Completes and parses, re-asking up to parse_retries times on an
/// unparseable answer.
std::pair<Verdict, ChatExchange> complete_verdict(const LlmClient& client, const ChatRequest& req) {
  for (int i = 0;; ++i) {
    auto ex = client.complete(req);
    try {
      return {parse_verdict(ex.response), std::move(ex)};
    } catch (const ParseError&) {
      if (i >= client.config().parse_retries) throw;
    }
  }
}

}  // namespace

double evaluate_cluster_coherence(const LlmClient& client, std::span<const std::string> words) {
  if (words.empty()) throw ValidationError("evaluate_cluster_coherence: empty word list");
  if (words.size() > client.config().max_words_per_prompt)
    throw ValidationError("evaluate_cluster_coherence: " + std::to_string(words.size()) +
                          " words exceed max_words_per_prompt " +
                          std::to_string(client.config().max_words_per_prompt));
  if (words.size() == 1) return 1.0;
  std::vector<std::string> subject(words.begin(), words.end());
  const auto req = client.make_request(
      PromptName::CoherenceEvaluation,
      {{"examples", client.config().examples.coherence_evaluation}, {"cluster", format_word_list(words)}},
      subject);
  const auto [verdict, ex] = complete_verdict(client, req);
  return verdict.kind == VerdictKind::Yes ? 1.0 : 0.0;
}

std::pair<Verdict, ChatExchange> judge_topic_words(const LlmClient& client, std::span<const std::string> words) {
  if (words.empty()) throw ValidationError("judge_topic_words: empty word list");
  std::vector<std::string> subject(words.begin(), words.end());
  const auto req = client.make_request(
      PromptName::PostCorrection,
      {{"examples", client.config().examples.post_correction}, {"words", format_word_list(words)}}, subject);
  return complete_verdict(client, req);
}

DistillResult distill_topics(const LlmClient& client, std::span<const std::string> vocabulary, int count) {
  if (count < 1) throw ValidationError("distill_topics: count must be >= 1");
  if (vocabulary.empty()) throw ValidationError("distill_topics: empty vocabulary");
  std::vector<std::string> subject(vocabulary.begin(), vocabulary.end());
  const auto req = client.make_request(PromptName::TopicInference,
                                       {{"count", std::to_string(count)},
                                        {"examples", client.config().examples.topic_inference},
                                        {"topics", format_word_list(vocabulary)}},
                                       subject);
  const auto ex = client.complete(req);

  DistillResult result;
  result.raw_response = ex.response;
  auto groups = parse_topic_groups(ex.response);
  const auto wanted = static_cast<std::size_t>(count);
  if (groups.size() > wanted) {
    result.report.surplus_groups = groups.size() - wanted;
    groups.resize(wanted);
  }
  result.topics = std::move(groups);

  const std::unordered_set<std::string> input(vocabulary.begin(), vocabulary.end());
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& group : result.topics) {
    for (const auto& w : group) {
      if (seen[w]++ > 0) {
        ++result.report.duplicates;
        continue;
      }
      (input.count(w) ? result.report.assigned : result.report.hallucinated).push_back(w);
    }
  }
  std::set<std::string> listed;
  for (const auto& w : vocabulary) {
    if (!seen.count(w) && listed.insert(w).second) result.report.missing.push_back(w);
  }

  if (result.topics.size() < wanted) {
    throw DistillParseError("distill_topics: parsed " + std::to_string(result.topics.size()) + " of " +
                                std::to_string(count) + " topic groups",
                            std::move(result));
  }
  return result;
}

}  // namespace topicloop
