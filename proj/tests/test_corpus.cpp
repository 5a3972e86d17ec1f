#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "test_helpers.hpp"
#include "topicloop/corpus.hpp"
#include "topicloop/errors.hpp"

using namespace topicloop;

namespace {

std::vector<RawDocument> toy() { return {{"a", {"x", "y", "x"}}, {"b", {"y", "z"}}}; }

}  // namespace

TEST_CASE("build_corpus without filtering keeps everything") {
  const auto raw = toy();
  const auto c = build_corpus(raw, 1, {});
  CHECK(c.vocabulary_size() == 3);
  CHECK(c.total_tokens() == 5);
  CHECK(c.vocabulary().words() == std::vector<std::string>{"x", "y", "z"});
  CHECK(c.vocabulary().doc_frequency() == std::vector<std::uint32_t>{1, 2, 1});
}

TEST_CASE("build_corpus min_count drops rare words from vocabulary and documents") {
  // df: x=1, y=2, z=1. Only y survives min_count=2.
  const auto raw = toy();
  const auto c = build_corpus(raw, 2, {});
  CHECK(c.vocabulary_size() == 1);
  CHECK(c.total_tokens() == 2);
  CHECK(c.decode(0) == std::vector<std::string>{"y"});
  CHECK(c.decode(1) == std::vector<std::string>{"y"});
}

TEST_CASE("stop words are removed and an all-stopword corpus is an error") {
  const auto raw = toy();
  const auto c = build_corpus(raw, 1, {"y"});
  CHECK(c.vocabulary().words() == std::vector<std::string>{"x", "z"});
  CHECK(c.total_tokens() == 3);
  CHECK_THROWS_AS(build_corpus(raw, 1, {"x", "y", "z"}), EmptyCorpusError);
  CHECK_THROWS_AS(build_corpus(std::vector<RawDocument>{}, 1, {}), EmptyCorpusError);
  CHECK_THROWS_AS(build_corpus(raw, 0, {}), ValidationError);
}

TEST_CASE("documents emptied by filtering keep their slot") {
  std::vector<RawDocument> raw{{"a", {"x", "y"}}, {"b", {"q"}}, {"c", {"x", "y"}}};
  const auto c = build_corpus(raw, 2, {});
  REQUIRE(c.num_documents() == 3);
  CHECK(c.document(1).id == "b");
  CHECK(c.document(1).tokens.empty());
}

TEST_CASE("vocabulary invariants and decode round trip on random corpora") {
  std::mt19937 gen(7);
  for (int trial = 0; trial < 25; ++trial) {
    const auto raw = testutil::random_raw_docs(gen, 12, 30, 20);
    const std::uint32_t min_count = 1 + trial % 3;
    const std::unordered_set<std::string> stop{"t1", "t2"};
    Corpus c;
    try {
      c = build_corpus(raw, min_count, stop);
    } catch (const EmptyCorpusError&) {
      continue;
    }
    const auto& v = c.vocabulary();
    for (WordId w = 0; w < v.size(); ++w) {
      CHECK(v.index_of(v.word(w)) == w);
      CHECK(v.doc_frequency()[w] >= min_count);
      CHECK(stop.count(v.word(w)) == 0);
    }
    std::size_t total = 0;
    for (std::size_t d = 0; d < raw.size(); ++d) {
      std::vector<std::string> expected;
      for (const auto& t : raw[d].tokens)
        if (v.contains(t)) expected.push_back(t);
      CHECK(c.decode(d) == expected);
      total += expected.size();
    }
    CHECK(c.total_tokens() == total);
    CHECK(build_corpus(raw, min_count, stop) == c);
  }
}

TEST_CASE("co-occurrence counts from documents") {
  std::vector<RawDocument> raw{{"1", {"x", "y"}}, {"2", {"y", "z"}}};
  const auto c = build_corpus(raw, 1, {});
  const auto idx = build_cooccurrence(c);
  const auto x = c.vocabulary().index_of("x"), y = c.vocabulary().index_of("y"), z = c.vocabulary().index_of("z");
  CHECK(idx.doc_count() == 2);
  CHECK(idx.single_count(y) == 2);
  CHECK(idx.pair_count(x, y) == 1);
  CHECK(idx.pair_count(y, x) == 1);
  CHECK(idx.pair_count(x, z) == 0);
  CHECK_THROWS_AS(idx.pair_count(x, x), ValidationError);

  std::vector<RawDocument> single{{"1", {"x"}}};
  const auto one = build_cooccurrence(build_corpus(single, 1, {}));
  CHECK(one.single_count(0) == 1);
  CHECK(one.nonzero_pairs().empty());

  std::vector<RawDocument> repeated{{"1", {"x", "x", "x", "x", "x"}}};
  CHECK(build_cooccurrence(build_corpus(repeated, 1, {})).single_count(0) == 1);
}

TEST_CASE("pair counts match brute-force enumeration") {
  std::mt19937 gen(11);
  const auto raw = testutil::random_raw_docs(gen, 40, 15, 10);
  const auto c = build_corpus(raw, 1, {});
  const auto idx = build_cooccurrence(c);
  const auto V = c.vocabulary_size();
  std::vector<std::set<WordId>> sets;
  for (const auto& d : c.documents()) sets.emplace_back(d.tokens.begin(), d.tokens.end());
  const auto pairs = idx.nonzero_pairs();
  for (WordId i = 0; i < V; ++i) {
    std::uint32_t single = 0;
    for (const auto& s : sets) single += s.count(i);
    CHECK(idx.single_count(i) == single);
    for (WordId j = i + 1; j < V; ++j) {
      std::uint32_t both = 0;
      for (const auto& s : sets) both += s.count(i) && s.count(j);
      CHECK(idx.pair_count(i, j) == both);
      CHECK(idx.pair_count(i, j) <= std::min(idx.single_count(i), idx.single_count(j)));
      auto it = pairs.find({i, j});
      CHECK((it == pairs.end() ? 0u : it->second) == both);
    }
  }
  for (const auto& [key, n] : pairs) CHECK(key.first < key.second);
}

TEST_CASE("JSONL parsing reports the failing line") {
  std::istringstream good("{\"id\":\"a\",\"tokens\":[\"x\"]}\n\n{\"id\":\"b\",\"tokens\":[\"y\",\"z\"]}\n");
  const auto docs = parse_jsonl(good);
  REQUIRE(docs.size() == 2);
  CHECK(docs[1].tokens.size() == 2);

  std::istringstream bad("{\"id\":\"a\",\"tokens\":[\"x\"]}\n{\"id\":\"b\",\"tokens\":\n");
  try {
    parse_jsonl(bad);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("bundle round trip and UTF-8 tokens") {
  std::vector<RawDocument> raw{{"a", {"宝宝", "妈妈", "宝宝"}}, {"b", {"妈妈", "玩具"}}};
  const auto c = build_corpus(raw, 1, {});
  const auto dir = testutil::temp_dir("bundle");
  save_bundle(c, dir / "c.json");
  CHECK(load_bundle(dir / "c.json") == c);

  std::ofstream(dir / "stop.txt") << "妈妈\r\n\n玩具\n";
  CHECK(read_stopwords(dir / "stop.txt") == std::unordered_set<std::string>{"妈妈", "玩具"});
}
