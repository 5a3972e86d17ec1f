#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "test_helpers.hpp"
#include "topicloop/commands.hpp"
#include "topicloop/errors.hpp"

using namespace topicloop;
namespace fs = std::filesystem;

namespace {

const fs::path kExamples = fs::path(TOPICLOOP_DATA_DIR) / "examples";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct RunResult {
  int code;
  std::string err;
};

RunResult run_cli(const std::string& args, const fs::path& dir) {
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + TOPICLOOP_CLI + "\" " + args + " >/dev/null 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::string last_line(const std::string& s) {
  auto end = s.find_last_not_of('\n');
  if (end == std::string::npos) return "";
  auto start = s.rfind('\n', end);
  return s.substr(start == std::string::npos ? 0 : start + 1, end - (start == std::string::npos ? 0 : start + 1) + 1);
}

fs::path ingest_tiny(const fs::path& dir) {
  IngestOptions o;
  o.input = kExamples / "tiny_corpus.jsonl";
  o.output = dir / "bundle.json";
  o.min_count = 2;
  o.stopwords = kExamples / "stopwords.txt";
  cmd_ingest(o);
  return o.output;
}

}  // namespace

TEST_CASE("ingest") {
  const auto dir = testutil::temp_dir("cmd_ingest");
  std::ofstream(dir / "three.jsonl") << "{\"id\":\"a\",\"tokens\":[\"x\",\"y\"]}\n"
                                        "{\"id\":\"b\",\"tokens\":[\"y\"]}\n"
                                        "{\"id\":\"c\",\"tokens\":[\"z\",\"y\"]}\n";
  IngestOptions o;
  o.input = dir / "three.jsonl";
  o.output = dir / "b.json";
  o.min_count = 1;
  CHECK(cmd_ingest(o).num_documents() == 3);
  CHECK(load_bundle(o.output).num_documents() == 3);

  // min_count=2 keeps only y (df 3).
  o.min_count = 2;
  CHECK(cmd_ingest(o).vocabulary_size() == 1);

  std::ofstream(dir / "bad.jsonl") << "{\"id\":\"a\",\"tokens\":[\"x\"]}\n{oops\n";
  o.input = dir / "bad.jsonl";
  try {
    cmd_ingest(o);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  const auto tiny = cmd_ingest(IngestOptions{kExamples / "tiny_corpus.jsonl", dir / "tiny.json", 2,
                                             kExamples / "stopwords.txt"});
  CHECK_FALSE(tiny.vocabulary().contains("the"));
  CHECK(tiny.vocabulary().contains("apple"));
}

TEST_CASE("train") {
  const auto dir = testutil::temp_dir("cmd_train");
  const auto bundle = ingest_tiny(dir);

  SUBCASE("passes 0 writes the pass-0 state only") {
    TrainOptions o;
    o.bundle = bundle;
    o.out_dir = dir / "p0";
    o.num_topics = 3;
    o.passes = 0;
    const auto r = cmd_train(o);
    CHECK(r.per_pass_perplexity.size() == 1);
    const auto ck = load_checkpoint(load_bundle(bundle), o.out_dir / "checkpoint.json");
    CHECK(ck.passes_done() == 0);
    CHECK(fs::exists(o.out_dir / "model.json"));
    CHECK(slurp(o.out_dir / "trace.csv").find("\n0,") != std::string::npos);
  }
  SUBCASE("same flags and seed give identical checkpoints") {
    TrainOptions o;
    o.bundle = bundle;
    o.num_topics = 3;
    o.passes = 5;
    o.init = "cluster";
    o.out_dir = dir / "a";
    cmd_train(o);
    o.out_dir = dir / "b";
    cmd_train(o);
    CHECK(slurp(dir / "a" / "checkpoint.json") == slurp(dir / "b" / "checkpoint.json"));
    CHECK(slurp(dir / "a" / "model.json") == slurp(dir / "b" / "model.json"));
    CHECK(fs::exists(dir / "a" / "clusters.json"));
  }
  SUBCASE("llm init runs offline with a mock judge") {
    TrainOptions o;
    o.bundle = bundle;
    o.out_dir = dir / "llm";
    o.num_topics = 3;
    o.passes = 3;
    o.init = "llm";
    o.judge.mock_rules = kExamples / "mock_rules.json";
    CHECK(cmd_train(o).per_pass_perplexity.size() == 4);
    CHECK(fs::exists(o.out_dir / "clusters.json"));
  }
  SUBCASE("llm init needs a judge") {
    TrainOptions o;
    o.bundle = bundle;
    o.out_dir = dir / "nojudge";
    o.num_topics = 3;
    o.init = "llm";
    CHECK_THROWS_AS(cmd_train(o), ValidationError);
  }
  SUBCASE("bad eta") {
    TrainOptions o;
    o.bundle = bundle;
    o.out_dir = dir / "eta";
    o.num_topics = 3;
    o.eta = "-1";
    CHECK_THROWS_AS(cmd_train(o), ValidationError);
  }
}

TEST_CASE("eval and postcorrect") {
  const auto dir = testutil::temp_dir("cmd_eval");
  const auto bundle = ingest_tiny(dir);
  TrainOptions t;
  t.bundle = bundle;
  t.out_dir = dir / "model";
  t.num_topics = 3;
  t.passes = 10;
  cmd_train(t);

  EvalOptions e{t.out_dir / "model.json", bundle, dir / "eval.json", 6};
  const auto j = cmd_eval(e);
  CHECK(j["topics"].size() == 3);
  CHECK(j["perplexity"].get<double>() > 1.0);
  CHECK(j["topics"][0]["top_words"].size() == 6);

  PostcorrectOptions p;
  p.model = t.out_dir / "model.json";
  p.bundle = bundle;
  p.output = dir / "post.json";
  p.top_n = 6;
  p.judge.mock_rules = kExamples / "mock_rules.json";
  const auto rep = cmd_postcorrect(p);
  CHECK(rep.records.size() == 3);
  CHECK(fs::exists(dir / "post.txt"));
  for (const auto& r : rep.records)
    for (const auto& w : r.removed_words) CHECK((w == "truck" || w == "ferry" || w == "drum" || w == "plum"));

  std::ofstream(dir / "down.json") << R"({"fail_first": 1000000})";
  p.judge.mock_rules = dir / "down.json";
  p.judge.max_attempts = 1;
  CHECK_THROWS_AS(cmd_postcorrect(p), TransportError);
}

TEST_CASE("CLI exit codes and error line") {
  const auto dir = testutil::temp_dir("cli");
  auto r = run_cli("", dir);
  CHECK(r.code == 1);
  r = run_cli("train --bundle nothing.json", dir);
  CHECK(r.code == 1);
  CHECK(last_line(r.err).rfind("topicloop: error: UsageError: ", 0) == 0);

  std::ofstream(dir / "bad.jsonl") << "{\"id\":\"a\",\"tokens\":[\"x\"]}\n{oops\n";
  r = run_cli("ingest --input " + (dir / "bad.jsonl").string() + " --output " + (dir / "b.json").string(), dir);
  CHECK(r.code == 2);
  CHECK(last_line(r.err).rfind("topicloop: error: FormatError: line 2", 0) == 0);

  r = run_cli("ingest --input " + (kExamples / "tiny_corpus.jsonl").string() + " --output " +
                  (dir / "tiny.json").string() + " --min-count 2",
              dir);
  CHECK(r.code == 0);

  r = run_cli("train --bundle " + (dir / "tiny.json").string() + " --out-dir " + (dir / "m").string() +
                  " --topics 3 --passes 5",
              dir);
  CHECK(r.code == 0);

  std::ofstream(dir / "down.json") << R"({"fail_first": 1000000, "failure": "http_status"})";
  r = run_cli("postcorrect --model " + (dir / "m" / "model.json").string() + " --bundle " +
                  (dir / "tiny.json").string() + " --output " + (dir / "p.json").string() +
                  " --top-n 5 --max-attempts 1 --mock-llm " + (dir / "down.json").string(),
              dir);
  CHECK(r.code == 3);
  CHECK(last_line(r.err).rfind("topicloop: error: TransportHttpStatus: ", 0) == 0);
}

TEST_CASE("CLI experiment with a seed override") {
  const auto dir = testutil::temp_dir("cli_exp");
  const auto r = run_cli("experiment --config " + (kExamples / "experiment_tiny.json").string() + " --output-dir " +
                             (dir / "out").string() + " --seed 7 --jobs 2",
                         dir);
  REQUIRE(r.code == 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(summary["failed_cells"].empty());
  CHECK(slurp(dir / "out" / "cells.csv").find(",7,") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "cells" / "llm_eta-auto_seed-7.json"));
}
