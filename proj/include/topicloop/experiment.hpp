#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "topicloop/corpus.hpp"
#include "topicloop/initializers.hpp"
#include "topicloop/lda.hpp"
#include "topicloop/llm_client.hpp"
#include "topicloop/metrics.hpp"
#include "topicloop/post_correction.hpp"

namespace topicloop {

// ---------------------------------------------------------------------------
// Synthetic corpora with known generating model

struct SyntheticSpec {
  int num_topics = 5;
  int vocabulary_size = 200;
  int num_docs = 500;
  int tokens_per_doc = 100;
  double alpha = 0.1;
  double beta = 0.01;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticCorpus {
  Corpus corpus;
  /// Generating model. phi columns follow the corpus vocabulary (words never
  /// drawn are dropped and each row renormalized over the rest).
  TopicModel truth;
};

/// phi_t ~ Dir(beta), theta_d ~ Dir(alpha), z ~ theta_d, w ~ phi_z.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Matching estimated topics to ground truth

struct TopicMatch {
  /// assignment[i] = true topic matched to estimated topic i.
  std::vector<Eigen::Index> assignment;
  std::vector<double> distances;  ///< total variation per matched pair
  double mean_tv = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix: Hungarian for
/// n <= 16, greedy by ascending cost otherwise. Returns row -> column.
std::vector<Eigen::Index> solve_assignment(const Eigen::MatrixXd& cost);

template <typename Scalar>
TopicMatch match_topics(const TopicModelT<Scalar>& estimated, const TopicModelT<Scalar>& truth) {
  if (estimated.phi.rows() != truth.phi.rows() || estimated.phi.cols() != truth.phi.cols())
    throw ValidationError("match_topics: models differ in topic count or vocabulary size");
  const Eigen::Index T = truth.phi.rows();
  Eigen::MatrixXd cost(T, T);
  for (Eigen::Index i = 0; i < T; ++i)
    for (Eigen::Index j = 0; j < T; ++j)
      cost(i, j) = 0.5 * static_cast<double>((estimated.phi.row(i) - truth.phi.row(j)).cwiseAbs().sum());
  TopicMatch m;
  m.assignment = solve_assignment(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < T; ++i) {
    m.distances.push_back(cost(i, m.assignment[static_cast<std::size_t>(i)]));
    total += m.distances.back();
  }
  m.mean_tv = T ? total / static_cast<double>(T) : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Comparison grid

struct EtaSetting {
  std::optional<double> value;  ///< empty = auto (1/T)
  std::string label() const;
};

struct JudgeSettings {
  nlohmann::json mock_rules;  ///< inline rule table; null when unused
  HttpConfig http;
  ClientConfig client;
  double threshold = 0.5;

  bool configured() const { return !mock_rules.is_null() || !http.base_url.empty(); }
  /// Mock transport when rules are present, HTTP otherwise.
  std::unique_ptr<LlmClient> make_client() const;
};

struct ExperimentConfig {
  std::optional<std::filesystem::path> corpus_path;  ///< corpus bundle or JSONL
  std::uint32_t min_count = 5;
  std::optional<std::filesystem::path> stopwords;
  std::optional<SyntheticSpec> synthetic;

  int num_topics = 0;
  std::optional<double> alpha;  ///< default 1/T
  std::vector<EtaSetting> etas{EtaSetting{}, EtaSetting{0.1}};
  std::vector<std::string> methods{"random", "cluster", "llm"};
  int passes = 20;
  std::vector<int> eval_passes{0, 20};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t top_n = 10;
  int embed_dim = 32;
  int kmeans_max_iters = 100;
  JudgeSettings judge;
  bool post_correction = false;
  std::size_t correction_top_n = 10;
  /// Share of documents (taken from the end) held out of training and
  /// scored by fold-in perplexity at each eval pass. 0 disables.
  double heldout_fraction = 0.0;
  int fold_in_passes = 20;
  int jobs = 1;

  double resolved_alpha() const { return alpha ? *alpha : 1.0 / num_topics; }
  void validate() const;
  /// Relative paths resolve against base_dir.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
};

/// Loads or generates the configured corpus.
Corpus load_experiment_corpus(const ExperimentConfig& config);

/// Splits off the last round(fraction * N) documents (at least one, leaving
/// at least one for training). Both parts keep the full vocabulary.
std::pair<Corpus, Corpus> split_heldout(const Corpus& corpus, double fraction);

struct CellResult {
  std::string method;
  std::string eta;
  std::uint64_t seed = 0;
  MetricReport report;
  std::optional<GuidedInitResult> guided;  ///< llm method only (assignments dropped)
  std::optional<CorrectionReport> correction;
  std::string error;  ///< non-empty when the cell failed
};

struct GridResult {
  std::vector<CellResult> cells;  ///< ordered method, eta, seed as configured
  std::size_t llm_calls = 0;
};

/// Runs every (method, eta, seed) cell. Pass 0 is measured right after
/// initialization. A failing cell is recorded and the others proceed. With a
/// held-out fraction, training uses only the leading documents.
GridResult run_grid(const ExperimentConfig& config, const Corpus& corpus, const LlmClient* client);

enum class TableKind { Perplexity, HeldoutPerplexity, CoherenceMean, CoherenceSum };

struct MergedCell {
  std::string method;
  std::string eta;
  int pass = 0;
  std::optional<double> mean;  ///< mean over seeds with a value
  std::vector<std::pair<std::uint64_t, double>> per_seed;
};

/// Cells keyed (method, eta, pass), in configured order; independent of the
/// order of grid.cells.
std::vector<MergedCell> merge_cells(const ExperimentConfig& config, const GridResult& grid, TableKind kind);

/// Rows = method, columns = (eta, pass), values averaged over seeds.
std::string table_csv(const ExperimentConfig& config, const GridResult& grid, TableKind kind);
/// Long form: one row per (method, eta, seed, eval pass).
std::string cells_csv(const ExperimentConfig& config, const GridResult& grid);

/// run_grid plus all report files in output_dir.
GridResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& output_dir);

}  // namespace topicloop
