#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "topicloop/corpus.hpp"
#include "topicloop/errors.hpp"
#include "topicloop/lda.hpp"

namespace topicloop {

/// PP(p) = 2^(-sum p log2 p), with 0 log 0 = 0. Rejects inputs that are not on
/// the simplex within 1e-9.
template <typename Derived>
typename Derived::Scalar entropy_perplexity(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  if (p.size() == 0) throw ValidationError("entropy_perplexity: empty distribution");
  if ((p.array() < Scalar(0)).any() || !p.allFinite())
    throw ValidationError("entropy_perplexity: negative or non-finite entry");
  if (std::abs(p.sum() - Scalar(1)) > Scalar(1e-9))
    throw ValidationError("entropy_perplexity: entries do not sum to 1");
  Scalar h(0);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar x = p(i);
    if (x > Scalar(0)) h -= x * std::log2(x);
  }
  return std::exp2(h);
}

/// exp(-(1/N_tokens) sum_d sum_i log sum_t theta[d][t] phi[t][w_di]).
template <typename Scalar>
Scalar corpus_perplexity(const TopicModelT<Scalar>& model, const Corpus& corpus) {
  if (model.num_documents() != static_cast<Eigen::Index>(corpus.num_documents()) ||
      model.vocabulary_size() != static_cast<Eigen::Index>(corpus.vocabulary_size()) ||
      model.theta.cols() != model.phi.rows())
    throw ValidationError("corpus_perplexity: model dimensions do not match corpus");
  if (corpus.total_tokens() == 0) throw ValidationError("corpus_perplexity: corpus has no tokens");

  const typename TopicModelT<Scalar>::Matrix word_topic = model.phi.transpose();
  Scalar log_lik(0);
  for (std::size_t d = 0; d < corpus.num_documents(); ++d) {
    const auto theta_d = model.theta.row(static_cast<Eigen::Index>(d));
    for (WordId w : corpus.document(d).tokens) {
      const Scalar p = theta_d.dot(word_topic.row(w));
      if (!(p > Scalar(0)))
        throw ValidationError("corpus_perplexity: zero probability for a token of document " + std::to_string(d));
      log_lik += std::log(p);
    }
  }
  return std::exp(-log_lik / Scalar(corpus.total_tokens()));
}

/// Smoothing added to the joint probability.
inline constexpr double kJointEpsilon = 1e-12;

/// Natural-log PMI from document frequencies.
double pmi(const CooccurrenceIndex& index, WordId wi, WordId wj, double epsilon = kJointEpsilon);
/// PMI / (-log P(wi, wj)), clamped to [-1, 1]. A joint probability of 1 and
/// wi == wj both give 1.
double npmi(const CooccurrenceIndex& index, WordId wi, WordId wj, double epsilon = kJointEpsilon);

struct CoherenceResult {
  /// Mean NPMI over unordered pairs; empty when fewer than two usable words.
  std::optional<double> mean;
  double sum = 0.0;
  std::size_t pairs = 0;
  std::vector<std::string> skipped;  ///< words absent from the vocabulary or never seen
};

CoherenceResult topic_coherence(const CooccurrenceIndex& index, const Vocabulary& vocab,
                                std::span<const std::string> topic_words);
CoherenceResult topic_coherence(const CooccurrenceIndex& index, std::span<const WordId> topic_words);

struct DescentRates {
  std::vector<double> rates;  ///< rate_k = (PP_{k-1} - PP_k) / PP_{k-1}
  double mean = 0.0;
  double cumulative = 0.0;  ///< (PP_0 - PP_last) / PP_0
};

DescentRates descent_rate(std::span<const double> trace);

struct CoherenceSnapshot {
  int pass = 0;
  std::vector<std::optional<double>> per_topic;  ///< mean NPMI of each topic's top words
  double mean_npmi = 0.0;                        ///< mean over defined topics
  double sum_npmi = 0.0;                         ///< sum of all pairwise NPMI values
};

/// Coherence of every topic's top_n words.
CoherenceSnapshot model_coherence(const TopicModel& model, const CooccurrenceIndex& index, std::size_t top_n,
                                  int pass);

struct MetricReport {
  std::string method;
  std::string eta_mode;
  double beta = 0.0;
  double alpha = 0.0;
  int num_topics = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<int, double>> per_pass_perplexity;
  /// Perplexity of held-out documents at the evaluated passes; empty when
  /// no documents are held out.
  std::vector<std::pair<int, double>> heldout_perplexity;
  std::vector<CoherenceSnapshot> coherence;
  DescentRates descent;

  const CoherenceSnapshot* coherence_at(int pass) const;
  std::optional<double> perplexity_at(int pass) const;
  std::optional<double> heldout_perplexity_at(int pass) const;
};

nlohmann::json to_json(const MetricReport& report);
/// Per-pass trace: pass,perplexity,descent_rate.
std::string trace_csv(const MetricReport& report);

}  // namespace topicloop
