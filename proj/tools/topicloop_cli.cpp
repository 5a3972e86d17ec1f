#include <CLI11.hpp>
#include <iostream>

#include "topicloop/commands.hpp"

using namespace topicloop;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTransport = 3;

void add_judge_options(CLI::App* cmd, JudgeOptions& judge) {
  cmd->add_option("--mock-llm", judge.mock_rules, "Mock transport rule file (JSON); no network is used")
      ->check(CLI::ExistingFile);
  cmd->add_option("--endpoint", judge.endpoint, "Chat-completions base URL (default: $TOPICLOOP_LLM_URL)");
  cmd->add_option("--llm-model", judge.model, "Model name sent to the endpoint (default: $TOPICLOOP_LLM_MODEL)");
  cmd->add_option("--fewshot-dir", judge.fewshot_dir, "Directory with <prompt>.txt few-shot example files")
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--max-attempts", judge.max_attempts, "Transport attempts per call")->check(CLI::PositiveNumber);
  cmd->add_option("--jobs", judge.max_concurrency, "Concurrent LLM requests")->check(CLI::PositiveNumber);
}

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << "topicloop: error: " << kind << ": " << message << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LDA topic modeling with collapsed Gibbs sampling and LLM-in-the-loop initialization and post-correction"};
  app.require_subcommand(1, 1);
  int verbosity = 0;
  app.add_flag("-v,--verbose", verbosity, "Print a summary after each command");

  IngestOptions ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Build a corpus bundle from JSONL documents");
  c_ingest->add_option("--input", ingest.input, "Corpus JSONL ({\"id\", \"tokens\"} per line)")->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--output", ingest.output, "Bundle path to write")->required();
  c_ingest->add_option("--min-count", ingest.min_count, "Minimum document frequency")->check(CLI::PositiveNumber);
  c_ingest->add_option("--stopwords", ingest.stopwords, "Stop-word file, one token per line")->check(CLI::ExistingFile);

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "Initialize and run the Gibbs sampler");
  c_train->add_option("--bundle", train.bundle, "Corpus bundle")->required()->check(CLI::ExistingFile);
  c_train->add_option("--out-dir", train.out_dir, "Output directory")->required();
  c_train->add_option("--topics", train.num_topics, "Number of topics")->required()->check(CLI::PositiveNumber);
  c_train->add_option("--alpha", train.alpha, "Document-topic prior (default 1/T)");
  c_train->add_option("--eta", train.eta, "Topic-word prior: auto (1/T) or a number");
  c_train->add_option("--init", train.init, "Initialization: random | cluster | llm")
      ->check(CLI::IsMember({"random", "cluster", "llm"}));
  c_train->add_option("--passes", train.passes, "Gibbs sweeps")->check(CLI::NonNegativeNumber);
  c_train->add_option("--seed", train.seed, "Random seed");
  c_train->add_option("--embed-dim", train.embed_dim, "Embedding dimension for clustering");
  c_train->add_option("--threshold", train.threshold, "Coherence threshold for llm init")->check(CLI::Range(0.0, 1.0));
  c_train->add_option("--top-n", train.top_n, "Top words per topic for coherence");
  c_train->add_option("--clusters", train.clusters, "Cluster set JSON to seed from instead of k-means")
      ->check(CLI::ExistingFile);
  add_judge_options(c_train, train.judge);

  EvalOptions eval;
  auto* c_eval = app.add_subcommand("eval", "Perplexity and NPMI coherence of a trained model");
  c_eval->add_option("--model", eval.model, "model.json from train")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--bundle", eval.bundle, "Corpus bundle")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--output", eval.output, "Metric report JSON to write")->required();
  c_eval->add_option("--top-n", eval.top_n, "Top words per topic")->check(CLI::Range(2, 1000));

  PostcorrectOptions post;
  auto* c_post = app.add_subcommand("postcorrect", "Filter unrelated words from topics with an LLM judge");
  c_post->add_option("--model", post.model, "model.json from train")->required()->check(CLI::ExistingFile);
  c_post->add_option("--bundle", post.bundle, "Corpus bundle")->required()->check(CLI::ExistingFile);
  c_post->add_option("--output", post.output, "Correction report JSON (a .txt table is written alongside)")->required();
  c_post->add_option("--top-n", post.top_n, "Top words per topic")->check(CLI::Range(2, 1000));
  add_judge_options(c_post, post.judge);

  ExperimentOptions exp;
  auto* c_exp = app.add_subcommand("experiment", "Run the method x eta x pass comparison grid");
  c_exp->add_option("--config", exp.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  c_exp->add_option("--output-dir", exp.output_dir, "Report directory")->required();
  c_exp->add_option("--jobs", exp.jobs, "Worker threads for grid cells")->check(CLI::PositiveNumber);
  c_exp->add_option("--mock-llm", exp.mock_rules, "Mock transport rule file; overrides the config's judge")
      ->check(CLI::ExistingFile);
  c_exp->add_option("--seed", exp.seed, "Run a single seed instead of the configured list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fail(kExitUsage, "UsageError", e.what());
  }

  try {
    if (*c_ingest) {
      const auto corpus = cmd_ingest(ingest);
      if (verbosity)
        std::cout << "documents=" << corpus.num_documents() << " vocabulary=" << corpus.vocabulary_size()
                  << " tokens=" << corpus.total_tokens() << "\n";
    } else if (*c_train) {
      const auto report = cmd_train(train);
      if (verbosity)
        std::cout << "perplexity pass0=" << report.per_pass_perplexity.front().second
                  << " final=" << report.per_pass_perplexity.back().second << "\n";
    } else if (*c_eval) {
      const auto j = cmd_eval(eval);
      if (verbosity) std::cout << "perplexity=" << j["perplexity"] << " coherence=" << j["coherence_mean_npmi"] << "\n";
    } else if (*c_post) {
      const auto report = cmd_postcorrect(post);
      if (verbosity) std::cout << correction_table(report);
    } else if (*c_exp) {
      const auto grid = cmd_experiment(exp);
      if (verbosity) std::cout << "cells=" << grid.cells.size() << " llm_calls=" << grid.llm_calls << "\n";
    }
  } catch (const TransportError& e) {
    return fail(kExitTransport, e.kind(), e.what());
  } catch (const Error& e) {
    return fail(e.error_class() == ErrorClass::Usage ? kExitUsage : kExitData, e.kind(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(kExitData, "FormatError", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(kExitData, "IoError", e.what());
  } catch (const std::exception& e) {
    return fail(kExitData, "InternalError", e.what());
  }
  return 0;
}
