#include "topicloop/post_correction.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "topicloop/parallel.hpp"

namespace topicloop {

using nlohmann::json;

CorrectionRecord correct_topic(const LlmClient& client, const CooccurrenceIndex& index, const Vocabulary& vocab,
                               std::span<const std::string> topic_words, std::size_t topic,
                               const CorrectionOptions& options) {
  if (topic_words.size() < 2) throw ValidationError("correct_topic: need at least two words");
  if (topic_words.size() > client.config().max_words_per_prompt)
    throw ValidationError("correct_topic: " + std::to_string(topic_words.size()) +
                          " words exceed max_words_per_prompt " +
                          std::to_string(client.config().max_words_per_prompt));

  CorrectionRecord rec;
  rec.topic = topic;
  rec.original_words.assign(topic_words.begin(), topic_words.end());
  rec.kept_words = rec.original_words;
  rec.coherence_before = topic_coherence(index, vocab, topic_words).mean;
  rec.coherence_after = rec.coherence_before;

  Verdict verdict;
  try {
    auto [v, ex] = judge_topic_words(client, topic_words);
    verdict = std::move(v);
    rec.verdict_raw = ex.response;
    rec.attempts = ex.attempts;
  } catch (const TransportError& e) {
    rec.failed = true;
    rec.transport_failure = e.failure();
    rec.error = e.kind() + ": " + e.what();
    return rec;
  } catch (const Error& e) {
    rec.failed = true;
    rec.error = e.kind() + ": " + e.what();
    return rec;
  }
  if (verdict.kind == VerdictKind::Yes) return rec;

  std::unordered_set<std::string> in_topic(rec.original_words.begin(), rec.original_words.end());
  std::unordered_set<std::string> flagged;
  for (const auto& w : verdict.rejected_words) {
    if (in_topic.count(w)) {
      flagged.insert(w);
    } else if (std::find(rec.judge_noise.begin(), rec.judge_noise.end(), w) == rec.judge_noise.end()) {
      rec.judge_noise.push_back(w);
    }
  }
  if (flagged.empty()) return rec;

  // Restore the best-ranked flagged words until min_kept survive.
  std::size_t survivors = 0;
  for (const auto& w : rec.original_words) survivors += flagged.count(w) ? 0 : 1;
  for (const auto& w : rec.original_words) {
    if (survivors >= options.min_kept) break;
    if (flagged.erase(w)) {
      ++survivors;
      rec.truncated = true;
    }
  }

  rec.kept_words.clear();
  for (const auto& w : rec.original_words) (flagged.count(w) ? rec.removed_words : rec.kept_words).push_back(w);
  rec.coherence_after = topic_coherence(index, vocab, rec.kept_words).mean;
  return rec;
}

CorrectionReport correct_model(const LlmClient& client, const TopicModel& model, const CooccurrenceIndex& index,
                               const Vocabulary& vocab, std::size_t top_n, const CorrectionOptions& options) {
  if (top_n < 2) throw ValidationError("correct_model: top_n must be >= 2");
  if (top_n > client.config().max_words_per_prompt)
    throw ValidationError("correct_model: top_n exceeds max_words_per_prompt");
  const auto T = static_cast<std::size_t>(model.num_topics());
  CorrectionReport report;
  report.records.resize(T);
  parallel_for(T, options.max_concurrency, [&](std::size_t t) {
    const auto words = top_words(model, vocab, static_cast<Eigen::Index>(t), top_n);
    report.records[t] = correct_topic(client, index, vocab, words, t, options);
  });

  auto& s = report.summary;
  s.topics = T;
  double before = 0.0, after = 0.0, topic_gain = 0.0;
  std::size_t defined = 0;
  for (const auto& r : report.records) {
    if (r.failed) ++s.failed_topics;
    if (!r.removed_words.empty()) ++s.corrected_topics;
    if (r.coherence_before && r.coherence_after) {
      before += *r.coherence_before;
      after += *r.coherence_after;
      if (*r.coherence_before != 0.0)
        topic_gain += (*r.coherence_after - *r.coherence_before) / std::abs(*r.coherence_before);
      ++defined;
    }
  }
  if (defined) {
    s.aggregate_before = before / static_cast<double>(defined);
    s.aggregate_after = after / static_cast<double>(defined);
    s.mean_topic_improvement = topic_gain / static_cast<double>(defined);
  }
  if (s.aggregate_before != 0.0)
    s.relative_improvement = (s.aggregate_after - s.aggregate_before) / std::abs(s.aggregate_before);
  return report;
}

json to_json(const CorrectionRecord& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j{{"topic", r.topic},
         {"original_words", r.original_words},
         {"removed_words", r.removed_words},
         {"kept_words", r.kept_words},
         {"coherence_before", opt(r.coherence_before)},
         {"coherence_after", opt(r.coherence_after)},
         {"judge_noise", r.judge_noise},
         {"verdict_raw", r.verdict_raw},
         {"attempts", r.attempts},
         {"truncated", r.truncated},
         {"failed", r.failed}};
  if (r.failed) j["error"] = r.error;
  return j;
}

json to_json(const CorrectionReport& report) {
  json records = json::array();
  for (const auto& r : report.records) records.push_back(to_json(r));
  const auto& s = report.summary;
  return json{{"records", std::move(records)},
              {"summary",
               {{"topics", s.topics},
                {"failed_topics", s.failed_topics},
                {"corrected_topics", s.corrected_topics},
                {"aggregate_before", s.aggregate_before},
                {"aggregate_after", s.aggregate_after},
                {"relative_improvement", s.relative_improvement},
                {"mean_topic_improvement", s.mean_topic_improvement}}}};
}

std::string correction_table(const CorrectionReport& report) {
  auto join = [](const std::vector<std::string>& words, const std::vector<std::string>* marked) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) out += ", ";
      const bool mark = marked && std::find(marked->begin(), marked->end(), words[i]) != marked->end();
      out += mark ? "*" + words[i] + "*" : words[i];
    }
    return out;
  };
  auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return std::string(buf);
  };
  std::string out;
  for (const auto& r : report.records) {
    out += "topic " + std::to_string(r.topic) + (r.failed ? "  [uncorrected: " + r.error + "]" : "") + "\n";
    out += "  original (" + fmt(r.coherence_before) + "): " + join(r.original_words, &r.removed_words) + "\n";
    out += "  filtered (" + fmt(r.coherence_after) + "): " + join(r.kept_words, nullptr) + "\n";
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "aggregate coherence %.4f -> %.4f (relative improvement %+.2f%%)\n",
                report.summary.aggregate_before, report.summary.aggregate_after,
                100.0 * report.summary.relative_improvement);
  out += buf;
  return out;
}

}  // namespace topicloop
