#include "topicloop/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "topicloop/parallel.hpp"

namespace topicloop {

using nlohmann::json;
namespace fs = std::filesystem;

std::string EtaSetting::label() const {
  if (!value) return "auto";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", *value);
  return buf;
}

std::unique_ptr<LlmClient> JudgeSettings::make_client() const {
  if (!mock_rules.is_null()) return std::make_unique<LlmClient>(std::make_shared<MockTransport>(mock_rules), client);
  if (!http.base_url.empty()) return std::make_unique<LlmClient>(std::make_shared<HttpTransport>(http), client);
  return nullptr;
}

void ExperimentConfig::validate() const {
  if (num_topics < 1) throw ValidationError("experiment: num_topics must be >= 1");
  if (alpha && !(*alpha > 0.0)) throw ValidationError("experiment: alpha must be > 0");
  if (methods.empty()) throw ValidationError("experiment: methods must be non-empty");
  for (const auto& m : methods)
    if (m != "random" && m != "cluster" && m != "llm") throw ValidationError("experiment: unknown method '" + m + "'");
  if (etas.empty()) throw ValidationError("experiment: at least one eta setting is required");
  for (const auto& e : etas)
    if (e.value && !(*e.value > 0.0)) throw ValidationError("experiment: eta values must be > 0");
  if (passes < 0) throw ValidationError("experiment: passes must be >= 0");
  for (int p : eval_passes)
    if (p < 0 || p > passes)
      throw ValidationError("experiment: eval pass " + std::to_string(p) + " outside [0, " + std::to_string(passes) + "]");
  if (seeds.empty()) throw ValidationError("experiment: at least one seed is required");
  if (top_n < 2) throw ValidationError("experiment: top_n must be >= 2");
  if (!corpus_path && !synthetic) throw ValidationError("experiment: no corpus source configured");
  if (judge.threshold < 0.0 || judge.threshold > 1.0) throw ValidationError("experiment: threshold must lie in [0, 1]");
  if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0))
    throw ValidationError("experiment: heldout_fraction must lie in [0, 1)");
  if (fold_in_passes < 0) throw ValidationError("experiment: fold_in_passes must be >= 0");
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

SyntheticSpec synthetic_from_json(const json& j) {
  SyntheticSpec s;
  s.num_topics = j.value("num_topics", s.num_topics);
  s.vocabulary_size = j.value("vocabulary_size", s.vocabulary_size);
  s.num_docs = j.value("num_docs", s.num_docs);
  s.tokens_per_doc = j.value("tokens_per_doc", s.tokens_per_doc);
  s.alpha = j.value("alpha", s.alpha);
  s.beta = j.value("beta", s.beta);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

EtaSetting eta_from_json(const json& j) {
  if (j.is_null() || (j.is_string() && (j == "auto" || j == "None" || j == "none"))) return {};
  if (j.is_number()) return EtaSetting{j.get<double>()};
  throw ValidationError("experiment: eta entries must be \"auto\" or a number");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  try {
    const auto& corpus = j.at("corpus");
    if (corpus.contains("synthetic")) {
      c.synthetic = synthetic_from_json(corpus.at("synthetic"));
    } else {
      c.corpus_path = resolve(base_dir, corpus.at("path").get<std::string>());
      c.min_count = corpus.value("min_count", c.min_count);
      if (corpus.contains("stopwords")) c.stopwords = resolve(base_dir, corpus.at("stopwords").get<std::string>());
    }
    c.num_topics = j.at("num_topics").get<int>();
    if (j.contains("alpha") && !j.at("alpha").is_null()) c.alpha = j.at("alpha").get<double>();
    if (j.contains("eta")) {
      c.etas.clear();
      if (j.at("eta").is_array()) {
        for (const auto& e : j.at("eta")) c.etas.push_back(eta_from_json(e));
      } else {
        c.etas.push_back(eta_from_json(j.at("eta")));
      }
    }
    if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
    c.passes = j.value("passes", c.passes);
    if (j.contains("eval_passes")) {
      c.eval_passes = j.at("eval_passes").get<std::vector<int>>();
    } else {
      c.eval_passes = {0, c.passes};
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.top_n = j.value("top_n", c.top_n);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.kmeans_max_iters = j.value("kmeans_max_iters", c.kmeans_max_iters);
    c.jobs = j.value("jobs", c.jobs);
    c.heldout_fraction = j.value("heldout_fraction", c.heldout_fraction);
    c.fold_in_passes = j.value("fold_in_passes", c.fold_in_passes);

    if (j.contains("judge")) {
      const auto& jj = j.at("judge");
      if (jj.contains("mock_rules")) {
        const auto& rules = jj.at("mock_rules");
        if (rules.is_string()) {
          const auto path = resolve(base_dir, rules.get<std::string>());
          std::ifstream in(path);
          if (!in) throw FormatError("cannot open mock rules " + path.string());
          c.judge.mock_rules = json::parse(in);
        } else {
          c.judge.mock_rules = rules;
        }
      }
      c.judge.http = HttpConfig::from_env();
      if (jj.contains("endpoint")) c.judge.http.base_url = jj.at("endpoint").get<std::string>();
      if (jj.contains("path")) c.judge.http.path = jj.at("path").get<std::string>();
      if (jj.contains("timeout_s")) c.judge.http.timeout = std::chrono::seconds(jj.at("timeout_s").get<int>());
      auto& cc = c.judge.client;
      if (const char* m = std::getenv("TOPICLOOP_LLM_MODEL")) cc.model = m;
      cc.model = jj.value("model", cc.model);
      cc.decoding.temperature = jj.value("temperature", cc.decoding.temperature);
      cc.decoding.max_tokens = jj.value("max_tokens", cc.decoding.max_tokens);
      cc.retry.max_attempts = jj.value("max_attempts", cc.retry.max_attempts);
      cc.retry.initial_backoff = std::chrono::milliseconds(jj.value("initial_backoff_ms", 250));
      cc.max_concurrency = jj.value("max_concurrency", cc.max_concurrency);
      cc.max_words_per_prompt = jj.value("max_words_per_prompt", cc.max_words_per_prompt);
      if (jj.contains("fewshot_dir"))
        cc.examples = FewShotExamples::load_dir(resolve(base_dir, jj.at("fewshot_dir").get<std::string>()));
      c.judge.threshold = jj.value("threshold", c.judge.threshold);
    } else {
      c.judge.http = HttpConfig::from_env();
    }
    if (j.contains("post_correction")) {
      const auto& pc = j.at("post_correction");
      c.post_correction = pc.value("enabled", true);
      c.correction_top_n = pc.value("top_n", c.correction_top_n);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("experiment config: ") + e.what());
  }
  std::vector<int> unique_passes;
  for (int p : c.eval_passes)
    if (std::find(unique_passes.begin(), unique_passes.end(), p) == unique_passes.end()) unique_passes.push_back(p);
  c.eval_passes = std::move(unique_passes);
  c.validate();
  return c;
}

Corpus load_experiment_corpus(const ExperimentConfig& config) {
  if (config.synthetic) return generate_synthetic(*config.synthetic).corpus;
  const auto& path = *config.corpus_path;
  if (path.extension() == ".jsonl") {
    const auto raw = read_jsonl(path);
    const auto stop = config.stopwords ? read_stopwords(*config.stopwords) : std::unordered_set<std::string>{};
    return build_corpus(raw, config.min_count, stop);
  }
  return load_bundle(path);
}

std::pair<Corpus, Corpus> split_heldout(const Corpus& corpus, double fraction) {
  const std::size_t n = corpus.num_documents();
  if (n < 2) throw ValidationError("split_heldout: need at least two documents");
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("split_heldout: fraction must lie in (0, 1)");
  auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  held = std::clamp<std::size_t>(held, 1, n - 1);
  const auto& docs = corpus.documents();
  const auto cut = docs.begin() + static_cast<std::ptrdiff_t>(n - held);
  return {Corpus(corpus.vocabulary(), {docs.begin(), cut}), Corpus(corpus.vocabulary(), {cut, docs.end()})};
}

namespace {

struct InitResult {
  Assignments assignments;
  std::optional<GuidedInitResult> guided;
  std::string error;
};

MetricReport run_chain(const ExperimentConfig& config, const Corpus& corpus, const CooccurrenceIndex& index,
                       const Corpus* heldout, const Assignments& init, const EtaSetting& eta, std::uint64_t seed,
                       const LlmClient* client, std::optional<CorrectionReport>& correction) {
  Hyperparams hyper{config.num_topics, config.resolved_alpha(), eta.value};
  SamplerState state(corpus, init, hyper, derive_seed(seed, "gibbs"));

  MetricReport report;
  report.eta_mode = eta.label();
  report.beta = hyper.beta();
  report.alpha = hyper.alpha;
  report.num_topics = hyper.num_topics;
  report.seed = seed;

  const std::set<int> eval(config.eval_passes.begin(), config.eval_passes.end());
  std::vector<double> trace;
  for (int pass = 0;; ++pass) {
    const auto model = estimate(state);
    const double pp = corpus_perplexity(model, corpus);
    report.per_pass_perplexity.emplace_back(pass, pp);
    trace.push_back(pp);
    if (eval.count(pass)) {
      report.coherence.push_back(model_coherence(model, index, config.top_n, pass));
      if (heldout) {
        const TopicModel folded{fold_in(model, *heldout, hyper.alpha, config.fold_in_passes,
                                        derive_seed(seed, "fold_in:" + std::to_string(pass))),
                                model.phi};
        report.heldout_perplexity.emplace_back(pass, corpus_perplexity(folded, *heldout));
      }
    }
    if (pass == config.passes) {
      if (config.post_correction && client) {
        CorrectionOptions opts;
        opts.max_concurrency = client->config().max_concurrency;
        correction = correct_model(*client, model, index, corpus.vocabulary(), config.correction_top_n, opts);
      }
      break;
    }
    gibbs_pass(state);
  }
  if (trace.size() >= 2) report.descent = descent_rate(trace);
  return report;
}

}  // namespace

GridResult run_grid(const ExperimentConfig& config, const Corpus& full_corpus, const LlmClient* client) {
  config.validate();
  std::optional<std::pair<Corpus, Corpus>> split;
  if (config.heldout_fraction > 0.0) split = split_heldout(full_corpus, config.heldout_fraction);
  const Corpus& corpus = split ? split->first : full_corpus;
  const Corpus* heldout = split ? &split->second : nullptr;
  const CooccurrenceIndex index(corpus);
  const auto calls_before = client ? client->call_count() : 0;
  const int T = config.num_topics;

  const bool needs_clusters =
      std::find_if(config.methods.begin(), config.methods.end(), [](const auto& m) { return m != "random"; }) !=
      config.methods.end();
  std::optional<WordEmbedding> embedding;
  std::string embedding_error;
  if (needs_clusters) {
    try {
      embedding = embed_vocabulary(corpus, std::max(2, config.embed_dim));
    } catch (const Error& e) {
      embedding_error = e.kind() + ": " + e.what();
    }
  }

  // Initial assignments per (method, seed); shared by every eta setting.
  const std::size_t M = config.methods.size();
  const std::size_t S = config.seeds.size();
  std::vector<InitResult> inits(M * S);
  parallel_for(M * S, config.jobs, [&](std::size_t k) {
    const auto& method = config.methods[k / S];
    const auto seed = config.seeds[k % S];
    auto& out = inits[k];
    try {
      const auto init_seed = derive_seed(seed, "init");
      if (method == "random") {
        out.assignments = random_init(corpus, T, init_seed);
        return;
      }
      if (!embedding) throw ValidationError("embedding failed: " + embedding_error);
      const auto clusters = kmeans_cluster(embedding->vectors, T, derive_seed(seed, "kmeans"), config.kmeans_max_iters);
      if (method == "cluster") {
        out.assignments = cluster_init(corpus, clusters, init_seed);
        return;
      }
      if (!client) throw ValidationError("llm method requires a judge configuration");
      LlmCoherenceJudge judge(*client);
      GuidedInitOptions opts;
      opts.threshold = config.judge.threshold;
      opts.max_words_per_prompt = client->config().max_words_per_prompt;
      opts.max_concurrency = client->config().max_concurrency;
      auto guided = llm_guided_init(corpus, clusters, judge, init_seed, opts);
      out.assignments = std::move(guided.assignments);
      guided.assignments.clear();
      out.guided = std::move(guided);
    } catch (const Error& e) {
      out.error = e.kind() + ": " + e.what();
    }
  });

  const std::size_t E = config.etas.size();
  GridResult grid;
  grid.cells.resize(M * E * S);
  parallel_for(grid.cells.size(), config.jobs, [&](std::size_t c) {
    const std::size_t m = c / (E * S);
    const std::size_t e = (c / S) % E;
    const std::size_t s = c % S;
    auto& cell = grid.cells[c];
    cell.method = config.methods[m];
    cell.eta = config.etas[e].label();
    cell.seed = config.seeds[s];
    const auto& init = inits[m * S + s];
    cell.guided = init.guided;
    if (!init.error.empty()) {
      cell.error = init.error;
      return;
    }
    try {
      cell.report = run_chain(config, corpus, index, heldout, init.assignments, config.etas[e], cell.seed,
                              config.post_correction ? client : nullptr, cell.correction);
    } catch (const Error& err) {
      cell.error = err.kind() + ": " + err.what();
    }
    cell.report.method = cell.method;
  });

  grid.llm_calls = client ? client->call_count() - calls_before : 0;
  return grid;
}

std::vector<MergedCell> merge_cells(const ExperimentConfig& config, const GridResult& grid, TableKind kind) {
  std::map<std::tuple<std::string, std::string, int>, std::map<std::uint64_t, double>> values;
  for (const auto& cell : grid.cells) {
    if (!cell.error.empty()) continue;
    for (int pass : config.eval_passes) {
      std::optional<double> v;
      if (kind == TableKind::Perplexity) {
        v = cell.report.perplexity_at(pass);
      } else if (kind == TableKind::HeldoutPerplexity) {
        v = cell.report.heldout_perplexity_at(pass);
      } else if (const auto* c = cell.report.coherence_at(pass)) {
        v = kind == TableKind::CoherenceMean ? c->mean_npmi : c->sum_npmi;
      }
      if (v && std::isfinite(*v)) values[{cell.method, cell.eta, pass}][cell.seed] = *v;
    }
  }
  std::vector<MergedCell> out;
  for (const auto& method : config.methods) {
    for (const auto& eta : config.etas) {
      for (int pass : config.eval_passes) {
        MergedCell mc{method, eta.label(), pass, std::nullopt, {}};
        auto it = values.find({method, mc.eta, pass});
        if (it != values.end()) {
          // Seed order as configured so the mean is summed in a fixed order.
          double total = 0.0;
          for (auto seed : config.seeds) {
            auto sv = it->second.find(seed);
            if (sv == it->second.end()) continue;
            mc.per_seed.emplace_back(seed, sv->second);
            total += sv->second;
          }
          if (!mc.per_seed.empty()) mc.mean = total / static_cast<double>(mc.per_seed.size());
        }
        out.push_back(std::move(mc));
      }
    }
  }
  return out;
}

namespace {

std::string fmt4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string table_csv(const ExperimentConfig& config, const GridResult& grid, TableKind kind) {
  const auto merged = merge_cells(config, grid, kind);
  std::string out = "method";
  for (const auto& eta : config.etas)
    for (int pass : config.eval_passes) out += ",eta=" + eta.label() + " pass=" + std::to_string(pass);
  out += "\n";
  std::size_t i = 0;
  for (const auto& method : config.methods) {
    out += method;
    for (std::size_t k = 0; k < config.etas.size() * config.eval_passes.size(); ++k, ++i) {
      out += ",";
      if (merged[i].mean) out += fmt4(*merged[i].mean);
    }
    out += "\n";
  }
  return out;
}

std::string cells_csv(const ExperimentConfig& config, const GridResult& grid) {
  std::string out = "method,eta,seed,pass,perplexity,heldout_perplexity,coherence_mean_npmi,coherence_sum_npmi,error\n";
  for (const auto& cell : grid.cells) {
    for (int pass : config.eval_passes) {
      out += cell.method + "," + cell.eta + "," + std::to_string(cell.seed) + "," + std::to_string(pass) + ",";
      if (cell.error.empty()) {
        if (auto pp = cell.report.perplexity_at(pass)) out += fmt4(*pp);
        out += ",";
        if (auto hp = cell.report.heldout_perplexity_at(pass)) out += fmt4(*hp);
        out += ",";
        if (const auto* c = cell.report.coherence_at(pass)) {
          if (std::isfinite(c->mean_npmi)) out += fmt4(c->mean_npmi);
          out += "," + fmt4(c->sum_npmi);
        } else {
          out += ",";
        }
        out += ",\n";
      } else {
        std::string err = cell.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out += ",,,," + err + "\n";
      }
    }
  }
  return out;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

}  // namespace

GridResult run_experiment(const ExperimentConfig& config, const fs::path& output_dir) {
  config.validate();
  const Corpus corpus = load_experiment_corpus(config);
  auto client = config.judge.configured() ? config.judge.make_client() : nullptr;
  auto grid = run_grid(config, corpus, client.get());

  fs::create_directories(output_dir / "cells");
  write_file(output_dir / "table1_perplexity.csv", table_csv(config, grid, TableKind::Perplexity));
  if (config.heldout_fraction > 0.0)
    write_file(output_dir / "table1_heldout_perplexity.csv", table_csv(config, grid, TableKind::HeldoutPerplexity));
  write_file(output_dir / "table2_coherence_mean_npmi.csv", table_csv(config, grid, TableKind::CoherenceMean));
  write_file(output_dir / "table2_coherence_sum_npmi.csv", table_csv(config, grid, TableKind::CoherenceSum));
  write_file(output_dir / "cells.csv", cells_csv(config, grid));

  json summary;
  summary["num_topics"] = config.num_topics;
  summary["alpha"] = config.resolved_alpha();
  summary["documents"] = corpus.num_documents();
  summary["heldout_fraction"] = config.heldout_fraction;
  summary["vocabulary_size"] = corpus.vocabulary_size();
  summary["total_tokens"] = corpus.total_tokens();
  summary["llm_calls"] = grid.llm_calls;
  summary["failed_cells"] = json::array();
  for (const auto& cell : grid.cells) {
    const std::string name = cell.method + "_eta-" + cell.eta + "_seed-" + std::to_string(cell.seed);
    json j = to_json(cell.report);
    if (!cell.error.empty()) {
      j["error"] = cell.error;
      summary["failed_cells"].push_back(name);
    }
    if (cell.guided) {
      j["guided_init"] = clusters_to_json(cell.guided->clusters, corpus.vocabulary());
      j["guided_init"]["errors"] = cell.guided->errors;
    }
    if (cell.correction) {
      j["post_correction"] = to_json(*cell.correction);
      write_file(output_dir / "cells" / (name + "_correction.txt"), correction_table(*cell.correction));
    }
    write_file(output_dir / "cells" / (name + ".json"), j.dump(2) + "\n");
  }
  write_file(output_dir / "summary.json", summary.dump(2) + "\n");
  return grid;
}

}  // namespace topicloop
