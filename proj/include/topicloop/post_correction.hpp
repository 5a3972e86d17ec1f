#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "topicloop/corpus.hpp"
#include "topicloop/lda.hpp"
#include "topicloop/llm_client.hpp"
#include "topicloop/metrics.hpp"

namespace topicloop {

struct CorrectionRecord {
  std::size_t topic = 0;
  std::vector<std::string> original_words;  ///< ordered by descending phi
  std::vector<std::string> removed_words;
  std::vector<std::string> kept_words;      ///< original order preserved
  std::optional<double> coherence_before;
  std::optional<double> coherence_after;
  /// Words the judge named that are not in the topic; never removed.
  std::vector<std::string> judge_noise;
  std::string verdict_raw;
  int attempts = 0;
  /// Removal would have left fewer than two words.
  bool truncated = false;
  /// Transport or parse failure; the topic is left as is.
  bool failed = false;
  std::string error;
  /// Set when the failure came from the transport rather than the reply.
  std::optional<TransportFailure> transport_failure;
};

struct CorrectionOptions {
  std::size_t min_kept = 2;
  int max_concurrency = 4;
};

/// One post-correction judgement for a topic's top words (ordered by
/// descending phi). A No verdict removes the named words that belong to the
/// topic; if fewer than min_kept would survive, the highest-ranked removed
/// words are restored.
CorrectionRecord correct_topic(const LlmClient& client, const CooccurrenceIndex& index, const Vocabulary& vocab,
                               std::span<const std::string> topic_words, std::size_t topic = 0,
                               const CorrectionOptions& options = {});

struct CorrectionSummary {
  std::size_t topics = 0;
  std::size_t failed_topics = 0;
  std::size_t corrected_topics = 0;  ///< topics with at least one removal
  /// Aggregate = mean over topics with defined coherence of mean pairwise NPMI.
  double aggregate_before = 0.0;
  double aggregate_after = 0.0;
  /// (after - before) / |before| on the aggregates; 0 when before is 0.
  double relative_improvement = 0.0;
  /// Mean of per-topic relative improvements.
  double mean_topic_improvement = 0.0;
};

struct CorrectionReport {
  std::vector<CorrectionRecord> records;  ///< ordered by topic index
  CorrectionSummary summary;
};

CorrectionReport correct_model(const LlmClient& client, const TopicModel& model, const CooccurrenceIndex& index,
                               const Vocabulary& vocab, std::size_t top_n, const CorrectionOptions& options = {});

nlohmann::json to_json(const CorrectionRecord& record);
nlohmann::json to_json(const CorrectionReport& report);
/// Side-by-side original / filtered listing, one block per topic, removed
/// words marked with *.
std::string correction_table(const CorrectionReport& report);

}  // namespace topicloop
