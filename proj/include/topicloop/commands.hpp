#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "topicloop/experiment.hpp"

namespace topicloop {

/// LLM settings shared by the subcommands that talk to a judge.
struct JudgeOptions {
  std::optional<std::filesystem::path> mock_rules;
  std::string endpoint;  ///< overrides TOPICLOOP_LLM_URL
  std::string model;     ///< overrides TOPICLOOP_LLM_MODEL
  std::optional<std::filesystem::path> fewshot_dir;
  int max_attempts = 3;
  int max_concurrency = 4;
  std::size_t max_words_per_prompt = 20;

  /// Throws ValidationError when neither a mock nor an endpoint is set.
  std::unique_ptr<LlmClient> make_client() const;
};

struct IngestOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  std::uint32_t min_count = 5;
  std::optional<std::filesystem::path> stopwords;
};

struct TrainOptions {
  std::filesystem::path bundle;
  std::filesystem::path out_dir;
  int num_topics = 0;
  std::optional<double> alpha;  ///< default 1/T
  std::string eta = "auto";     ///< "auto" or a positive number
  std::string init = "random";  ///< random | cluster | llm
  int passes = 20;
  std::uint64_t seed = 1;
  int embed_dim = 32;
  int kmeans_max_iters = 100;
  double threshold = 0.5;
  std::size_t top_n = 10;
  /// Seed from a saved cluster set instead of k-means (cluster and llm).
  std::optional<std::filesystem::path> clusters;
  JudgeOptions judge;
};

struct EvalOptions {
  std::filesystem::path model;
  std::filesystem::path bundle;
  std::filesystem::path output;
  std::size_t top_n = 10;
};

struct PostcorrectOptions {
  std::filesystem::path model;
  std::filesystem::path bundle;
  std::filesystem::path output;
  std::size_t top_n = 10;
  JudgeOptions judge;
};

struct ExperimentOptions {
  std::filesystem::path config;
  std::filesystem::path output_dir;
  std::optional<int> jobs;
  /// Replaces the configured seed list with this single seed.
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> mock_rules;
};

/// Writes the corpus bundle; returns the built corpus.
Corpus cmd_ingest(const IngestOptions& opts);
/// Writes model.json, checkpoint.json, trace.csv and report.json (plus
/// clusters.json for cluster/llm init) into out_dir.
MetricReport cmd_train(const TrainOptions& opts);
/// Writes a metric report (perplexity, per-topic coherence, top words).
nlohmann::json cmd_eval(const EvalOptions& opts);
/// Writes the JSON correction report and a side-by-side .txt table.
CorrectionReport cmd_postcorrect(const PostcorrectOptions& opts);
GridResult cmd_experiment(const ExperimentOptions& opts);

}  // namespace topicloop
