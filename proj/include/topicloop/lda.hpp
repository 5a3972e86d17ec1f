#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "topicloop/corpus.hpp"
#include "topicloop/errors.hpp"
#include "topicloop/rng.hpp"

namespace topicloop {

using TopicId = std::uint32_t;
using CountMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// Per-document topic labels, one per token position.
using Assignments = std::vector<std::vector<TopicId>>;

struct Hyperparams {
  int num_topics = 1;
  double alpha = 0.1;
  /// Symmetric topic-word prior. Empty means "auto", realized as 1/T.
  std::optional<double> eta;

  double beta() const { return eta ? *eta : 1.0 / num_topics; }
  void validate() const;
};

/// Mutable state of one collapsed Gibbs chain: the labels z and the three
/// count structures derived from them.
///
/// The state keeps its own flat copy of the token stream, so it does not
/// reference the Corpus it was built from.
class SamplerState {
 public:
  /// Builds counts with one pass over (document, position). Throws
  /// ValidationError naming document and position on a shape mismatch or
  /// an out-of-range label.
  SamplerState(const Corpus& corpus, const Assignments& assignments, const Hyperparams& hyper,
               std::uint64_t seed);

  const Hyperparams& hyper() const noexcept { return hyper_; }
  int num_topics() const noexcept { return hyper_.num_topics; }
  std::size_t num_documents() const noexcept { return offsets_.size() - 1; }
  std::size_t vocabulary_size() const noexcept { return vocab_size_; }
  std::size_t total_tokens() const noexcept { return words_.size(); }
  std::size_t doc_length(std::size_t d) const { return offsets_[d + 1] - offsets_[d]; }

  std::span<const TopicId> z(std::size_t d) const {
    return {topics_.data() + offsets_[d], doc_length(d)};
  }
  std::span<const WordId> words(std::size_t d) const {
    return {words_.data() + offsets_[d], doc_length(d)};
  }
  Assignments assignments() const;

  const CountMatrix& n_wt() const noexcept { return n_wt_; }  ///< |V| x T
  const CountMatrix& n_td() const noexcept { return n_td_; }  ///< N x T
  const CountVector& n_t() const noexcept { return n_t_; }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t passes_done() const noexcept { return passes_; }
  const Rng& rng() const noexcept { return rng_; }

 private:
  friend void gibbs_pass(SamplerState& state);
  friend SamplerState load_checkpoint(const Corpus& corpus, const std::filesystem::path& path);

  Hyperparams hyper_;
  std::size_t vocab_size_;
  std::vector<std::size_t> offsets_;
  std::vector<WordId> words_;
  std::vector<TopicId> topics_;
  CountMatrix n_wt_;
  CountMatrix n_td_;
  CountVector n_t_;
  std::uint64_t seed_;
  std::uint64_t passes_ = 0;
  Rng rng_;
};

inline SamplerState init_state(const Corpus& corpus, const Assignments& assignments,
                               const Hyperparams& hyper, std::uint64_t seed) {
  return SamplerState(corpus, assignments, hyper, seed);
}

/// Full conditional of the label at (doc, pos), with that token excluded
/// from the counts. Normalized to sum to one.
Eigen::VectorXd conditional_distribution(const SamplerState& state, std::size_t doc, std::size_t pos);

/// One sequential sweep in (document, position) order.
void gibbs_pass(SamplerState& state);

template <typename Scalar>
struct TopicModelT {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Matrix theta;  ///< N x T, row d is the topic mixture of document d
  Matrix phi;    ///< T x |V|, row t is the word distribution of topic t

  Eigen::Index num_topics() const { return phi.rows(); }
  Eigen::Index vocabulary_size() const { return phi.cols(); }
  Eigen::Index num_documents() const { return theta.rows(); }
};
using TopicModel = TopicModelT<double>;

/// Smoothed point estimates:
///   theta[d][t] = (n_td + alpha) / (M_d + T alpha)
///   phi[t][w]   = (n_wt + beta)  / (n_t + |V| beta)
template <typename Scalar = double>
TopicModelT<Scalar> estimate(const SamplerState& state) {
  using Matrix = typename TopicModelT<Scalar>::Matrix;
  const auto T = static_cast<Eigen::Index>(state.num_topics());
  const auto V = static_cast<Eigen::Index>(state.vocabulary_size());
  const Scalar alpha(state.hyper().alpha);
  const Scalar beta(state.hyper().beta());

  TopicModelT<Scalar> model;
  model.theta = (state.n_td().template cast<Scalar>().array() + alpha).matrix();
  for (Eigen::Index d = 0; d < model.theta.rows(); ++d)
    model.theta.row(d) /= Scalar(state.doc_length(static_cast<std::size_t>(d))) + Scalar(T) * alpha;

  model.phi = (state.n_wt().transpose().template cast<Scalar>().array() + beta).matrix();
  for (Eigen::Index t = 0; t < T; ++t)
    model.phi.row(t) /= Scalar(state.n_t()(t)) + Scalar(V) * beta;
  return model;
}

/// Indices of the n most probable words of topic t; ties go to the lower
/// vocabulary index.
template <typename Scalar>
std::vector<WordId> top_word_ids(const TopicModelT<Scalar>& model, Eigen::Index t, std::size_t n) {
  if (t < 0 || t >= model.num_topics())
    throw ValidationError("topic index " + std::to_string(t) + " out of range");
  if (n < 1) throw ValidationError("top_words: n must be >= 1");
  const auto V = static_cast<std::size_t>(model.vocabulary_size());
  n = std::min(n, V);
  std::vector<WordId> ids(V);
  std::iota(ids.begin(), ids.end(), WordId{0});
  const auto row = model.phi.row(t);
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(),
                    [&](WordId a, WordId b) { return row(a) > row(b) || (row(a) == row(b) && a < b); });
  ids.resize(n);
  return ids;
}

template <typename Scalar>
std::vector<std::string> top_words(const TopicModelT<Scalar>& model, const Vocabulary& vocab,
                                   Eigen::Index t, std::size_t n) {
  std::vector<std::string> out;
  for (WordId id : top_word_ids(model, t, n)) out.push_back(vocab.word(id));
  return out;
}

/// Document-topic mixtures for unseen documents with phi held fixed: Gibbs
/// sweeps over the labels with p(t) proportional to phi[t][w] (n_td + alpha),
/// then theta[d][t] = (n_td + alpha) / (M_d + T alpha). Documents must use the
/// model's vocabulary indices.
TopicModel::Matrix fold_in(const TopicModel& model, const Corpus& documents, double alpha, int passes,
                           std::uint64_t seed);

/// JSON snapshot of z, hyperparameters, seed, RNG position and pass counter.
void save_checkpoint(const SamplerState& state, const std::filesystem::path& path);
/// Restores a checkpoint against the corpus it was taken on; counts are
/// rebuilt from z.
SamplerState load_checkpoint(const Corpus& corpus, const std::filesystem::path& path);

void save_model(const TopicModel& model, const Vocabulary& vocab, const Hyperparams& hyper,
                const std::filesystem::path& path);
struct LoadedModel {
  TopicModel model;
  std::vector<std::string> vocabulary;
  Hyperparams hyper;
};
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace topicloop
