#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <set>

#include "test_helpers.hpp"
#include "verdict_cases.hpp"
#include "topicloop/errors.hpp"
#include "topicloop/post_correction.hpp"

using namespace topicloop;
using nlohmann::json;
using Words = std::vector<std::string>;

namespace {

const Words& kTopic = testutil::kExampleTopic;
const Words& kFlagged = testutil::kExampleFlagged;
const Words& kFiltered = testutil::kExampleFiltered;

// Parenting words co-occur with each other; the flagged science words
// co-occur only among themselves.
Corpus table_corpus() {
  std::vector<RawDocument> raw;
  for (int d = 0; d < 30; ++d) {
    RawDocument doc{"p" + std::to_string(d), {}};
    for (std::size_t i = 0; i < kFiltered.size(); ++i)
      if ((i + static_cast<std::size_t>(d)) % 3 != 0) doc.tokens.push_back(kFiltered[i]);
    raw.push_back(doc);
  }
  for (int d = 0; d < 10; ++d) {
    RawDocument doc{"s" + std::to_string(d), {}};
    for (std::size_t i = 0; i < kFlagged.size(); ++i)
      if ((i + static_cast<std::size_t>(d)) % 2 == 0) doc.tokens.push_back(kFlagged[i]);
    doc.tokens.push_back(kFiltered[static_cast<std::size_t>(d)]);
    raw.push_back(doc);
  }
  return build_corpus(raw, 1, {});
}

LlmClient client_with(json rules) {
  ClientConfig cfg;
  cfg.retry.max_attempts = 2;
  cfg.retry.initial_backoff = std::chrono::milliseconds(0);
  return LlmClient(std::make_shared<MockTransport>(std::move(rules)), cfg);
}

json flag_rules(const Words& words) {
  return json{{"rules", json::array({json{{"task", "post_correction"}, {"flag_words", words}}})}};
}

}  // namespace

TEST_CASE("the flagged words of the example topic leave the filtered list") {
  const auto c = table_corpus();
  const auto idx = build_cooccurrence(c);
  auto client = client_with(flag_rules(kFlagged));
  const auto r = correct_topic(client, idx, c.vocabulary(), kTopic);
  CHECK(r.removed_words == kFlagged);
  CHECK(r.kept_words == kFiltered);
  CHECK(r.judge_noise.empty());
  CHECK_FALSE(r.failed);
  CHECK(*r.coherence_after > *r.coherence_before);
}

TEST_CASE("a Yes verdict is a no-op") {
  const auto c = table_corpus();
  const auto idx = build_cooccurrence(c);
  auto client = client_with(json{{"default", "Yes."}});
  const auto r = correct_topic(client, idx, c.vocabulary(), kTopic);
  CHECK(r.removed_words.empty());
  CHECK(r.kept_words == kTopic);
  CHECK(*r.coherence_after == *r.coherence_before);
}

TEST_CASE("words outside the topic are judge noise") {
  const auto c = table_corpus();
  const auto idx = build_cooccurrence(c);
  auto client = client_with(json{{"default", "No [\"星座\", \"不存在\"]"}});
  const auto r = correct_topic(client, idx, c.vocabulary(), kTopic);
  CHECK(r.removed_words == Words{"星座"});
  CHECK(r.judge_noise == Words{"不存在"});
  CHECK(r.kept_words.size() == 19);
}

TEST_CASE("removal never leaves fewer than two words") {
  const auto c = table_corpus();
  const auto idx = build_cooccurrence(c);
  Words three{"宝宝", "妈妈", "星座"};
  auto client = client_with(json{{"default", "No [\"宝宝\", \"妈妈\", \"星座\"]"}});
  const auto r = correct_topic(client, idx, c.vocabulary(), three);
  CHECK(r.truncated);
  CHECK(r.kept_words == Words{"宝宝", "妈妈"});
  CHECK(r.removed_words == Words{"星座"});
}

TEST_CASE("transport and parse failures leave the topic uncorrected") {
  const auto c = table_corpus();
  const auto idx = build_cooccurrence(c);
  auto broken = client_with(json{{"fail_first", 100}});
  auto r = correct_topic(broken, idx, c.vocabulary(), kTopic);
  CHECK(r.failed);
  CHECK(r.kept_words == kTopic);
  CHECK_FALSE(r.error.empty());

  auto garbled = client_with(json{{"default", "perhaps"}});
  r = correct_topic(garbled, idx, c.vocabulary(), kTopic);
  CHECK(r.failed);
  CHECK(r.removed_words.empty());
}

namespace {

// Two planted topics over words 0..12 and 13..25; words 10..12 and 23..25
// are noise words that the topic's documents never contain together with
// the topic's own words.
struct Planted {
  Corpus corpus;
  TopicModel model;
  Words noise;
};

Planted planted() {
  std::mt19937 gen(17);
  std::vector<std::vector<WordId>> docs;
  for (int d = 0; d < 80; ++d) {
    const WordId base = d % 2 ? 13 : 0;
    std::vector<WordId> doc;
    for (int i = 0; i < 8; ++i) doc.push_back(base + static_cast<WordId>(gen() % 10));
    docs.push_back(doc);
  }
  for (int d = 0; d < 12; ++d) {
    const WordId base = d % 2 ? 23 : 10;
    docs.push_back({base, static_cast<WordId>(base + 1), static_cast<WordId>(base + 2)});
  }
  Planted p{testutil::make_corpus(26, docs), {}, {}};
  p.model.theta = TopicModel::Matrix::Constant(static_cast<Eigen::Index>(docs.size()), 2, 0.5);
  p.model.phi = TopicModel::Matrix::Constant(2, 26, 1e-6);
  for (int t = 0; t < 2; ++t) {
    const int base = t ? 13 : 0;
    for (int i = 0; i < 13; ++i) p.model.phi(t, base + i) = (i < 10 ? 1.0 : 0.5) - 0.01 * i;
    p.model.phi.row(t) /= p.model.phi.row(t).sum();
    for (int i = 10; i < 13; ++i) p.noise.push_back("w" + std::to_string(base + i));
  }
  return p;
}

}  // namespace

TEST_CASE("removing planted noise improves aggregate coherence") {
  const auto p = planted();
  const auto idx = build_cooccurrence(p.corpus);
  auto client = client_with(flag_rules(p.noise));
  const auto rep = correct_model(client, p.model, idx, p.corpus.vocabulary(), 13);
  REQUIRE(rep.records.size() == 2);
  for (const auto& r : rep.records) {
    CHECK(r.removed_words.size() == 3);
    CHECK(*r.coherence_after > *r.coherence_before);
  }
  CHECK(rep.summary.corrected_topics == 2);
  CHECK(rep.summary.relative_improvement > 0.0);
  CHECK(rep.summary.aggregate_after > rep.summary.aggregate_before);

  const auto j = to_json(rep);
  CHECK(j["records"].size() == 2);
  CHECK(correction_table(rep).find("*w10*") != std::string::npos);
}

TEST_CASE("an all-Yes judge yields exactly zero improvement") {
  const auto p = planted();
  const auto idx = build_cooccurrence(p.corpus);
  auto client = client_with(json{{"default", "Yes."}});
  const auto rep = correct_model(client, p.model, idx, p.corpus.vocabulary(), 13);
  CHECK(rep.summary.relative_improvement == 0.0);
  CHECK(rep.summary.mean_topic_improvement == 0.0);
  CHECK(rep.summary.aggregate_after == rep.summary.aggregate_before);
  CHECK(rep.summary.corrected_topics == 0);
}

TEST_CASE("a single-topic model's summary equals its record") {
  auto p = planted();
  TopicModel one;
  one.theta = TopicModel::Matrix::Ones(p.model.theta.rows(), 1);
  one.phi = p.model.phi.topRows(1);
  const auto idx = build_cooccurrence(p.corpus);
  auto client = client_with(flag_rules(p.noise));
  const auto rep = correct_model(client, one, idx, p.corpus.vocabulary(), 13);
  REQUIRE(rep.records.size() == 1);
  const auto& r = rep.records[0];
  CHECK(rep.summary.aggregate_before == *r.coherence_before);
  CHECK(rep.summary.aggregate_after == *r.coherence_after);
  CHECK(rep.summary.relative_improvement ==
        doctest::Approx((*r.coherence_after - *r.coherence_before) / std::abs(*r.coherence_before)));
}

TEST_CASE("top_n bounds") {
  const auto p = planted();
  const auto idx = build_cooccurrence(p.corpus);
  auto client = client_with(json{{"default", "Yes."}});
  CHECK_THROWS_AS(correct_model(client, p.model, idx, p.corpus.vocabulary(), 1), ValidationError);
  CHECK_THROWS_AS(correct_model(client, p.model, idx, p.corpus.vocabulary(), 21), ValidationError);
}

TEST_CASE("correction records are consistent") {
  const auto p = planted();
  const auto idx = build_cooccurrence(p.corpus);
  Words flagged = p.noise;
  flagged.push_back("w0");
  flagged.push_back("not-a-word");
  auto client = client_with(flag_rules(flagged));
  const auto rep = correct_model(client, p.model, idx, p.corpus.vocabulary(), 13);
  for (const auto& r : rep.records) {
    std::set<std::string> original(r.original_words.begin(), r.original_words.end());
    for (const auto& w : r.kept_words) CHECK(original.count(w) == 1);
    for (const auto& w : r.removed_words) {
      CHECK(original.count(w) == 1);
      CHECK(std::find(r.kept_words.begin(), r.kept_words.end(), w) == r.kept_words.end());
    }
    CHECK(r.kept_words.size() + r.removed_words.size() == r.original_words.size());
  }
}

TEST_CASE("re-correcting a corrected topic under a Yes verdict changes nothing") {
  const auto c = table_corpus();
  const auto idx = build_cooccurrence(c);
  auto flagging = client_with(flag_rules(kFlagged));
  const auto first = correct_topic(flagging, idx, c.vocabulary(), kTopic);
  auto yes = client_with(json{{"default", "Yes."}});
  const auto second = correct_topic(yes, idx, c.vocabulary(), first.kept_words);
  CHECK(second.kept_words == first.kept_words);
  CHECK(second.removed_words.empty());
  CHECK(*second.coherence_before == *first.coherence_after);
  // The flagging judge finds nothing left to flag either.
  const auto third = correct_topic(flagging, idx, c.vocabulary(), first.kept_words);
  CHECK(third.kept_words == first.kept_words);
}

TEST_CASE("an all-Yes judge passes every record through unchanged") {
  const auto p = planted();
  const auto idx = build_cooccurrence(p.corpus);
  auto client = client_with(json{{"default", "Yes."}});
  const auto rep = correct_model(client, p.model, idx, p.corpus.vocabulary(), 13);
  for (const auto& r : rep.records) {
    CHECK(r.kept_words == r.original_words);
    CHECK(std::memcmp(&*r.coherence_before, &*r.coherence_after, sizeof(double)) == 0);
  }
}
