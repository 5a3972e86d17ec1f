#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topicloop/corpus.hpp"
#include "topicloop/lda.hpp"
#include "topicloop/llm_client.hpp"

namespace topicloop {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ClusterLabel { Unevaluated, Accepted, Rejected };

std::string to_string(ClusterLabel label);
ClusterLabel cluster_label_from_string(const std::string& s);

/// A partial partition of the vocabulary into exactly T (possibly empty)
/// clusters. Cluster t seeds topic t.
struct ClusterSet {
  std::vector<std::vector<WordId>> clusters;
  /// Empty, or one verdict per cluster.
  std::vector<ClusterLabel> labels;

  std::size_t size() const noexcept { return clusters.size(); }
  /// Clusters used for seeding: all of them when unlabeled, otherwise only
  /// the accepted ones.
  bool seeds_topic(std::size_t t) const { return labels.empty() || labels[t] == ClusterLabel::Accepted; }
  /// Throws ValidationError unless clusters are disjoint, in range and T in number.
  void validate(std::size_t vocabulary_size, int num_topics) const;
};

/// {"clusters": [[word, ...], ...], "labels": ["accepted" | "rejected" | "unevaluated", ...]}
nlohmann::json clusters_to_json(const ClusterSet& clusters, const Vocabulary& vocab);
ClusterSet clusters_from_json(const nlohmann::json& j, const Vocabulary& vocab);
void save_clusters(const ClusterSet& clusters, const Vocabulary& vocab, const std::filesystem::path& path);
ClusterSet load_clusters(const Vocabulary& vocab, const std::filesystem::path& path);

/// Every token independently uniform over the T topics.
Assignments random_init(const Corpus& corpus, int num_topics, std::uint64_t seed);

struct WordEmbedding {
  RowMatrixXd vectors;  ///< |V| x D, rows L2-normalized
  std::vector<std::string> warnings;

  Eigen::Index dim() const { return vectors.cols(); }
};

/// Spectral embedding of the log1p-dampened document co-occurrence matrix
/// (diagonal = log1p document frequency). Top-|lambda| eigenpairs come from
/// a fixed-seed subspace iteration, scaled by sqrt|lambda|, sign-fixed so
/// each column sums non-negative, then row-normalized. dim is clamped to |V|
/// with a warning.
WordEmbedding embed_vocabulary(const Corpus& corpus, int dim);

/// Lloyd's algorithm with k-means++ seeding. An emptied cluster takes the
/// point farthest from the centroid of the currently largest cluster.
ClusterSet kmeans_cluster(const RowMatrixXd& embeddings, int num_clusters, std::uint64_t seed, int max_iters = 100);

/// Tokens of words in a seeding cluster get that cluster's topic; the rest
/// keep the label random_init would give them under the same seed.
Assignments cluster_init(const Corpus& corpus, const ClusterSet& clusters, std::uint64_t seed);

/// Scores a word cluster for semantic coherence, in [0, 1].
class CoherenceJudge {
 public:
  virtual ~CoherenceJudge() = default;
  virtual double score(std::span<const std::string> words) const = 0;
};

/// Yes/No cluster verdicts from an LLM (Yes = 1, No = 0).
class LlmCoherenceJudge : public CoherenceJudge {
 public:
  explicit LlmCoherenceJudge(const LlmClient& client) : client_(client) {}
  double score(std::span<const std::string> words) const override {
    return evaluate_cluster_coherence(client_, words);
  }

 private:
  const LlmClient& client_;
};

/// Graded judge: the mean of a pairwise similarity over all unordered word
/// pairs of the cluster. A single word scores 1.
class PairwiseSimilarityJudge : public CoherenceJudge {
 public:
  using Similarity = std::function<double(const std::string&, const std::string&)>;
  explicit PairwiseSimilarityJudge(Similarity sim) : sim_(std::move(sim)) {}
  double score(std::span<const std::string> words) const override;

 private:
  Similarity sim_;
};

struct GuidedInitOptions {
  double threshold = 0.5;
  std::size_t max_words_per_prompt = 20;
  int max_concurrency = 4;
};

struct GuidedInitResult {
  Assignments assignments;
  ClusterSet clusters;  ///< input clusters with verdict labels
  std::vector<std::optional<double>> scores;
  std::vector<std::string> errors;  ///< "cluster <t>: <message>" for unevaluated clusters
};

/// Scores each non-empty cluster (its most frequent words, up to the cap),
/// accepts those at or above the threshold and seeds only from them. Judge
/// failures leave the cluster unevaluated, which seeds nothing.
GuidedInitResult llm_guided_init(const Corpus& corpus, const ClusterSet& clusters, const CoherenceJudge& judge,
                                 std::uint64_t seed, const GuidedInitOptions& options = {});

}  // namespace topicloop
