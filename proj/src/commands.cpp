#include "topicloop/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace topicloop {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

std::optional<double> parse_eta(const std::string& s) {
  if (s == "auto" || s == "None" || s == "none") return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !(v > 0.0)) throw ValidationError("eta must be 'auto' or a positive number, got '" + s + "'");
  return v;
}

}  // namespace

std::unique_ptr<LlmClient> JudgeOptions::make_client() const {
  ClientConfig cfg;
  if (const char* m = std::getenv("TOPICLOOP_LLM_MODEL")) cfg.model = m;
  if (!model.empty()) cfg.model = model;
  cfg.retry.max_attempts = max_attempts;
  cfg.max_concurrency = max_concurrency;
  cfg.max_words_per_prompt = max_words_per_prompt;
  if (fewshot_dir) cfg.examples = FewShotExamples::load_dir(*fewshot_dir);
  if (mock_rules) return std::make_unique<LlmClient>(MockTransport::from_file(*mock_rules), cfg);
  auto http = HttpConfig::from_env();
  if (!endpoint.empty()) http.base_url = endpoint;
  if (http.base_url.empty())
    throw ValidationError("no LLM configured: pass --mock-llm or --endpoint, or set TOPICLOOP_LLM_URL");
  return std::make_unique<LlmClient>(std::make_shared<HttpTransport>(http), cfg);
}

Corpus cmd_ingest(const IngestOptions& opts) {
  const auto raw = read_jsonl(opts.input);
  const auto stop = opts.stopwords ? read_stopwords(*opts.stopwords) : std::unordered_set<std::string>{};
  auto corpus = build_corpus(raw, opts.min_count, stop);
  save_bundle(corpus, opts.output);
  return corpus;
}

MetricReport cmd_train(const TrainOptions& opts) {
  const Corpus corpus = load_bundle(opts.bundle);
  Hyperparams hyper{opts.num_topics, opts.alpha ? *opts.alpha : 1.0 / std::max(1, opts.num_topics),
                    parse_eta(opts.eta)};
  hyper.validate();
  if (opts.passes < 0) throw ValidationError("passes must be >= 0");
  fs::create_directories(opts.out_dir);

  const auto init_seed = derive_seed(opts.seed, "init");
  Assignments init;
  if (opts.init == "random") {
    init = random_init(corpus, hyper.num_topics, init_seed);
  } else if (opts.init == "cluster" || opts.init == "llm") {
    ClusterSet clusters;
    if (opts.clusters) {
      clusters = load_clusters(corpus.vocabulary(), *opts.clusters);
    } else {
      const auto emb = embed_vocabulary(corpus, std::max(2, opts.embed_dim));
      clusters = kmeans_cluster(emb.vectors, hyper.num_topics, derive_seed(opts.seed, "kmeans"), opts.kmeans_max_iters);
    }
    if (opts.init == "cluster") {
      init = cluster_init(corpus, clusters, init_seed);
      save_clusters(clusters, corpus.vocabulary(), opts.out_dir / "clusters.json");
    } else {
      auto client = opts.judge.make_client();
      LlmCoherenceJudge judge(*client);
      GuidedInitOptions g;
      g.threshold = opts.threshold;
      g.max_words_per_prompt = client->config().max_words_per_prompt;
      g.max_concurrency = client->config().max_concurrency;
      auto guided = llm_guided_init(corpus, clusters, judge, init_seed, g);
      init = std::move(guided.assignments);
      auto cj = clusters_to_json(guided.clusters, corpus.vocabulary());
      cj["errors"] = guided.errors;
      write_text(opts.out_dir / "clusters.json", cj.dump(2) + "\n");
    }
  } else {
    throw ValidationError("unknown init method '" + opts.init + "' (random | cluster | llm)");
  }

  const CooccurrenceIndex index(corpus);
  SamplerState state(corpus, init, hyper, derive_seed(opts.seed, "gibbs"));
  MetricReport report;
  report.method = opts.init;
  report.eta_mode = opts.eta == "auto" || opts.eta == "None" || opts.eta == "none" ? "auto" : opts.eta;
  report.beta = hyper.beta();
  report.alpha = hyper.alpha;
  report.num_topics = hyper.num_topics;
  report.seed = opts.seed;
  std::vector<double> trace;
  TopicModel model;
  for (int pass = 0;; ++pass) {
    model = estimate(state);
    trace.push_back(corpus_perplexity(model, corpus));
    report.per_pass_perplexity.emplace_back(pass, trace.back());
    if (pass == opts.passes) break;
    gibbs_pass(state);
  }
  report.coherence.push_back(model_coherence(model, index, opts.top_n, opts.passes));
  if (trace.size() >= 2) report.descent = descent_rate(trace);

  save_model(model, corpus.vocabulary(), hyper, opts.out_dir / "model.json");
  save_checkpoint(state, opts.out_dir / "checkpoint.json");
  write_text(opts.out_dir / "trace.csv", trace_csv(report));
  write_text(opts.out_dir / "report.json", to_json(report).dump(2) + "\n");
  return report;
}

namespace {

/// The model's vocabulary must be the bundle's, in the same order.
void check_model_matches(const LoadedModel& loaded, const Corpus& corpus, bool need_documents) {
  if (loaded.vocabulary != corpus.vocabulary().words())
    throw ValidationError("model vocabulary does not match the corpus bundle");
  if (need_documents && loaded.model.num_documents() != static_cast<Eigen::Index>(corpus.num_documents()))
    throw ValidationError("model document count does not match the corpus bundle");
}

}  // namespace

json cmd_eval(const EvalOptions& opts) {
  const Corpus corpus = load_bundle(opts.bundle);
  const auto loaded = load_model(opts.model);
  check_model_matches(loaded, corpus, true);
  const CooccurrenceIndex index(corpus);

  json j;
  j["perplexity"] = corpus_perplexity(loaded.model, corpus);
  const auto snap = model_coherence(loaded.model, index, opts.top_n, 0);
  j["coherence_mean_npmi"] = std::isfinite(snap.mean_npmi) ? json(snap.mean_npmi) : json(nullptr);
  j["coherence_sum_npmi"] = snap.sum_npmi;
  j["top_n"] = opts.top_n;
  json topics = json::array();
  for (Eigen::Index t = 0; t < loaded.model.num_topics(); ++t) {
    const auto& c = snap.per_topic[static_cast<std::size_t>(t)];
    topics.push_back({{"topic", t},
                      {"top_words", top_words(loaded.model, corpus.vocabulary(), t, opts.top_n)},
                      {"coherence_npmi", c ? json(*c) : json(nullptr)}});
  }
  j["topics"] = std::move(topics);
  write_text(opts.output, j.dump(2) + "\n");
  return j;
}

CorrectionReport cmd_postcorrect(const PostcorrectOptions& opts) {
  const Corpus corpus = load_bundle(opts.bundle);
  const auto loaded = load_model(opts.model);
  check_model_matches(loaded, corpus, false);
  const CooccurrenceIndex index(corpus);
  auto client = opts.judge.make_client();
  CorrectionOptions co;
  co.max_concurrency = client->config().max_concurrency;
  auto report = correct_model(*client, loaded.model, index, corpus.vocabulary(), opts.top_n, co);
  write_text(opts.output, to_json(report).dump(2) + "\n");
  auto table = opts.output;
  table.replace_extension(".txt");
  write_text(table, correction_table(report));
  // A judge that never answered is an environment problem, not a result.
  const auto& recs = report.records;
  if (!recs.empty() && std::all_of(recs.begin(), recs.end(), [](const auto& r) { return r.transport_failure; }))
    throw TransportError(*recs.front().transport_failure, "judge unreachable for every topic; " + recs.front().error);
  return report;
}

GridResult cmd_experiment(const ExperimentOptions& opts) {
  std::ifstream in(opts.config);
  if (!in) throw FormatError("cannot open experiment config " + opts.config.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("experiment config " + opts.config.string() + ": " + e.what());
  }
  if (opts.mock_rules) {
    j["judge"]["mock_rules"] = fs::absolute(*opts.mock_rules).string();
  }
  auto config = ExperimentConfig::from_json(j, opts.config.parent_path());
  if (opts.jobs) config.jobs = *opts.jobs;
  if (opts.seed) config.seeds = {*opts.seed};
  return run_experiment(config, opts.output_dir);
}

}  // namespace topicloop
