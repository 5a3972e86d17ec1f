#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "test_helpers.hpp"
#include "topicloop/errors.hpp"
#include "topicloop/initializers.hpp"

using namespace topicloop;
using testutil::make_corpus;
using nlohmann::json;

namespace {

Corpus random_corpus(unsigned seed, int docs = 30, int vocab = 24, int len = 15) {
  std::mt19937 gen(seed);
  return build_corpus(testutil::random_raw_docs(gen, docs, vocab, len), 1, {});
}

// Two word blocks {0..4} and {5..9}; each document draws from one block only.
Corpus block_corpus() {
  std::mt19937 gen(4);
  std::vector<std::vector<WordId>> docs;
  for (int d = 0; d < 60; ++d) {
    const WordId base = d % 2 ? 5 : 0;
    std::vector<WordId> doc;
    for (int i = 0; i < 6; ++i) doc.push_back(base + static_cast<WordId>(gen() % 5));
    docs.push_back(doc);
  }
  return make_corpus(10, docs);
}

class FunctionJudge : public CoherenceJudge {
 public:
  explicit FunctionJudge(std::function<double(std::span<const std::string>)> fn) : fn_(std::move(fn)) {}
  double score(std::span<const std::string> words) const override { return fn_(words); }

 private:
  std::function<double(std::span<const std::string>)> fn_;
};

ClusterSet two_clusters_over(const Corpus& c) {
  ClusterSet cs;
  cs.clusters.resize(2);
  for (WordId w = 0; w < c.vocabulary_size(); ++w) cs.clusters[w % 2].push_back(w);
  return cs;
}

}  // namespace

TEST_CASE("random_init") {
  const auto c = random_corpus(1);
  for (const auto& doc : random_init(c, 1, 5))
    for (auto z : doc) CHECK(z == 0);
  CHECK(random_init(c, 3, 9) == random_init(c, 3, 9));
  CHECK(random_init(c, 3, 9) != random_init(c, 3, 10));
  CHECK_THROWS_AS(random_init(c, 0, 1), ValidationError);

  // 100k tokens, T=4: each share within 2 points of 25%.
  std::vector<std::vector<WordId>> docs(100, std::vector<WordId>(1000, 0));
  const auto big = make_corpus(1, docs);
  std::array<std::size_t, 4> counts{};
  for (const auto& doc : random_init(big, 4, 123))
    for (auto z : doc) ++counts[z];
  for (auto n : counts) CHECK(std::abs(n / 100000.0 - 0.25) < 0.02);
}

TEST_CASE("embedding construction") {
  SUBCASE("identical occurrence patterns give identical vectors") {
    const auto c = make_corpus(4, {{0, 1, 2}, {0, 1}, {2, 3}, {0, 1, 3}});
    const auto e = embed_vocabulary(c, 3);
    CHECK((e.vectors.row(0) - e.vectors.row(1)).norm() == 0.0);
  }
  SUBCASE("dimension clamps to the vocabulary size") {
    const auto c = make_corpus(3, {{0, 1}, {1, 2}});
    const auto e = embed_vocabulary(c, 8);
    CHECK(e.dim() == 3);
    CHECK(e.warnings.size() == 1);
    CHECK_THROWS_AS(embed_vocabulary(c, 0), ValidationError);
  }
  SUBCASE("block structure separates by cosine") {
    const auto e = embed_vocabulary(block_corpus(), 4);
    for (int i = 0; i < 10; ++i) CHECK(e.vectors.row(i).norm() == doctest::Approx(1.0));
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j)
        for (int k = 0; k < 10; ++k) {
          if (i == j || (i < 5) != (j < 5) || (i < 5) == (k < 5)) continue;
          CHECK(e.vectors.row(i).dot(e.vectors.row(j)) > e.vectors.row(i).dot(e.vectors.row(k)));
        }
  }
  SUBCASE("deterministic") {
    const auto c = random_corpus(2);
    CHECK(embed_vocabulary(c, 5).vectors == embed_vocabulary(c, 5).vectors);
  }
}

TEST_CASE("kmeans clustering") {
  SUBCASE("k equals the number of distinct vectors") {
    RowMatrixXd pts(6, 2);
    pts << 1, 0, 0, 1, 1, 0, -1, 0, 0, 1, -1, 0;
    const auto cs = kmeans_cluster(pts, 3, 7);
    REQUIRE(cs.size() == 3);
    std::set<std::vector<WordId>> groups(cs.clusters.begin(), cs.clusters.end());
    CHECK(groups == std::set<std::vector<WordId>>{{0, 2}, {1, 4}, {3, 5}});
  }
  SUBCASE("two separated blobs are recovered exactly") {
    std::mt19937 gen(3);
    std::normal_distribution<double> noise(0.0, 0.1);
    RowMatrixXd pts(40, 3);
    for (int i = 0; i < 40; ++i)
      for (int k = 0; k < 3; ++k) pts(i, k) = (i < 20 ? 5.0 : -5.0) + noise(gen);
    const auto cs = kmeans_cluster(pts, 2, 11);
    std::set<std::vector<WordId>> groups(cs.clusters.begin(), cs.clusters.end());
    std::vector<WordId> a(20), b(20);
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 20);
    CHECK(groups == std::set<std::vector<WordId>>{a, b});
    CHECK(kmeans_cluster(pts, 2, 11).clusters == cs.clusters);
  }
  SUBCASE("every point is assigned exactly once, no empty cluster") {
    const auto e = embed_vocabulary(random_corpus(5), 6);
    const auto cs = kmeans_cluster(e.vectors, 5, 1);
    std::vector<int> seen(static_cast<std::size_t>(e.vectors.rows()), 0);
    for (const auto& cl : cs.clusters) {
      CHECK_FALSE(cl.empty());
      for (auto w : cl) ++seen[w];
    }
    for (int s : seen) CHECK(s == 1);
  }
  SUBCASE("more clusters than points") {
    RowMatrixXd pts = RowMatrixXd::Identity(3, 3);
    CHECK_THROWS_AS(kmeans_cluster(pts, 4, 1), ValidationError);
  }
}

TEST_CASE("cluster_init") {
  SUBCASE("clustered words take their cluster's topic") {
    const auto c = make_corpus(3, {{2, 0}});
    ClusterSet cs;
    cs.clusters = {{0}, {1}, {2}};
    CHECK(cluster_init(c, cs, 1) == Assignments{{2, 0}});
  }
  SUBCASE("all rejected falls back to random_init") {
    const auto c = random_corpus(6);
    auto cs = two_clusters_over(c);
    cs.labels = {ClusterLabel::Rejected, ClusterLabel::Rejected};
    CHECK(cluster_init(c, cs, 31) == random_init(c, 2, 31));
  }
  SUBCASE("partially clustered vocabulary") {
    const auto c = random_corpus(7);
    ClusterSet cs;
    cs.clusters.resize(3);
    const auto V = static_cast<WordId>(c.vocabulary_size());
    for (WordId w = 0; w < V / 2; ++w) cs.clusters[w % 3].push_back(w);
    const auto z = cluster_init(c, cs, 8);
    const auto base = random_init(c, 3, 8);
    for (std::size_t d = 0; d < c.num_documents(); ++d)
      for (std::size_t i = 0; i < z[d].size(); ++i) {
        const auto w = c.document(d).tokens[i];
        CHECK(z[d][i] == (w < V / 2 ? w % 3 : base[d][i]));
      }
  }
  SUBCASE("overlapping clusters are invalid") {
    const auto c = make_corpus(3, {{0, 1, 2}});
    ClusterSet cs;
    cs.clusters = {{0, 1}, {1}};
    CHECK_THROWS_AS(cluster_init(c, cs, 1), ValidationError);
  }
}

TEST_CASE("cluster set serialization") {
  const auto c = random_corpus(8);
  auto cs = two_clusters_over(c);
  cs.labels = {ClusterLabel::Accepted, ClusterLabel::Unevaluated};
  const auto back = clusters_from_json(clusters_to_json(cs, c.vocabulary()), c.vocabulary());
  CHECK(back.clusters == cs.clusters);
  CHECK(back.labels == cs.labels);
  CHECK(cluster_label_from_string(to_string(ClusterLabel::Rejected)) == ClusterLabel::Rejected);
}

TEST_CASE("llm_guided_init fallbacks") {
  const auto c = random_corpus(9);
  const auto cs = two_clusters_over(c);
  FunctionJudge yes([](auto) { return 1.0; });
  FunctionJudge no([](auto) { return 0.0; });
  const auto accepted = llm_guided_init(c, cs, yes, 17);
  CHECK(accepted.assignments == cluster_init(c, cs, 17));
  CHECK(accepted.clusters.labels == std::vector<ClusterLabel>{ClusterLabel::Accepted, ClusterLabel::Accepted});
  const auto rejected = llm_guided_init(c, cs, no, 17);
  CHECK(rejected.assignments == random_init(c, 2, 17));
}

TEST_CASE("llm_guided_init with a marker-word mock judge") {
  // Three clusters; clusters 0 and 2 contain the marker word w3 or w9.
  const auto c = make_corpus(12, {{0, 1, 2, 3, 4, 5}, {6, 7, 8, 9, 10, 11}, {0, 3, 6, 9}});
  ClusterSet cs;
  cs.clusters = {{0, 1, 2, 3}, {4, 5, 6, 7}, {8, 9, 10, 11}};
  auto transport = std::make_shared<MockTransport>(
      json{{"rules", json::array({json{{"has_word", json::array({"w3", "w9"})}, {"respond", "Yes."}}})},
           {"default", "No [\"w0\"]"}});
  LlmClient client(transport);
  LlmCoherenceJudge judge(client);
  const auto r = llm_guided_init(c, cs, judge, 2);
  CHECK(r.clusters.labels ==
        std::vector<ClusterLabel>{ClusterLabel::Accepted, ClusterLabel::Rejected, ClusterLabel::Accepted});
  CHECK(r.errors.empty());
  CHECK(transport->calls() == 3);
}

TEST_CASE("llm_guided_init records judge failures without aborting") {
  const auto c = random_corpus(10);
  const auto cs = two_clusters_over(c);
  auto transport = std::make_shared<MockTransport>(json{{"fail_first", 100}});
  ClientConfig cfg;
  cfg.retry.max_attempts = 2;
  cfg.retry.initial_backoff = std::chrono::milliseconds(0);
  LlmClient client(transport, cfg);
  LlmCoherenceJudge judge(client);
  const auto r = llm_guided_init(c, cs, judge, 4);
  CHECK(r.errors.size() == 2);
  CHECK(r.clusters.labels == std::vector<ClusterLabel>{ClusterLabel::Unevaluated, ClusterLabel::Unevaluated});
  CHECK(r.assignments == random_init(c, 2, 4));
}

TEST_CASE("graded judge and threshold") {
  PairwiseSimilarityJudge judge([](const std::string& a, const std::string& b) { return a[0] == b[0] ? 1.0 : 0.0; });
  std::vector<std::string> one{"ax"}, same{"ax", "ay", "az"}, mixed{"ax", "ay", "bz"};
  CHECK(judge.score(one) == 1.0);
  CHECK(judge.score(same) == 1.0);
  CHECK(judge.score(mixed) == doctest::Approx(1.0 / 3.0));

  const auto c = make_corpus(4, {{0, 1, 2, 3}});
  ClusterSet cs;
  cs.clusters = {{0, 1}, {2, 3}};
  FunctionJudge fixed([](std::span<const std::string> w) { return w[0] == "w0" ? 0.6 : 0.4; });
  GuidedInitOptions opts;
  opts.threshold = 0.5;
  const auto r = llm_guided_init(c, cs, fixed, 1, opts);
  CHECK(r.clusters.labels == std::vector<ClusterLabel>{ClusterLabel::Accepted, ClusterLabel::Rejected});
  CHECK(*r.scores[0] == 0.6);
}

TEST_CASE("all initializers emit corpus-shaped assignments with labels below T") {
  const auto c = random_corpus(11);
  const auto emb = embed_vocabulary(c, 6);
  const auto cs = kmeans_cluster(emb.vectors, 4, 2);
  FunctionJudge half([](std::span<const std::string> w) { return w.size() % 2 ? 1.0 : 0.0; });
  for (const auto& z : {random_init(c, 4, 1), cluster_init(c, cs, 1), llm_guided_init(c, cs, half, 1).assignments}) {
    REQUIRE(z.size() == c.num_documents());
    for (std::size_t d = 0; d < z.size(); ++d) {
      CHECK(z[d].size() == c.document(d).tokens.size());
      for (auto t : z[d]) CHECK(t < 4u);
    }
  }
  CHECK(cluster_init(c, cs, 5) == cluster_init(c, cs, 5));
  CHECK(llm_guided_init(c, cs, half, 5).assignments == llm_guided_init(c, cs, half, 5).assignments);
}

TEST_CASE("guided init fixes a subset of the tokens cluster_init fixes") {
  const auto c = random_corpus(12, 40, 30, 20);
  const auto cs = kmeans_cluster(embed_vocabulary(c, 6).vectors, 5, 3);
  FunctionJudge some([](std::span<const std::string> w) { return w[0] < "t2" ? 1.0 : 0.0; });
  const auto guided = llm_guided_init(c, cs, some, 9);
  std::vector<int> owner(c.vocabulary_size(), -1), accepted_owner(c.vocabulary_size(), -1);
  for (std::size_t t = 0; t < cs.size(); ++t)
    for (auto w : cs.clusters[t]) {
      owner[w] = static_cast<int>(t);
      if (guided.clusters.labels[t] == ClusterLabel::Accepted) accepted_owner[w] = static_cast<int>(t);
    }
  // Deterministic positions under guided init are those of accepted clusters,
  // which are a subset of all clustered positions.
  const auto base = random_init(c, 5, 9);
  for (std::size_t d = 0; d < c.num_documents(); ++d)
    for (std::size_t i = 0; i < guided.assignments[d].size(); ++i) {
      const auto w = c.document(d).tokens[i];
      if (accepted_owner[w] >= 0) {
        CHECK(owner[w] == accepted_owner[w]);
        CHECK(guided.assignments[d][i] == static_cast<TopicId>(accepted_owner[w]));
      } else {
        CHECK(guided.assignments[d][i] == base[d][i]);
      }
    }
}
