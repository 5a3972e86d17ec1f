#include "topicloop/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "topicloop/errors.hpp"

namespace topicloop {

using nlohmann::json;

Vocabulary::Vocabulary(std::vector<std::string> words, std::vector<std::uint32_t> doc_frequency)
    : words_(std::move(words)), doc_frequency_(std::move(doc_frequency)) {
  if (words_.size() != doc_frequency_.size())
    throw ValidationError("vocabulary: words and doc_frequency differ in length");
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<WordId>(i)).second)
      throw ValidationError("vocabulary: duplicate word '" + words_[i] + "'");
  }
}

WordId Vocabulary::index_of(const std::string& w) const {
  auto it = index_.find(w);
  if (it == index_.end()) throw ValidationError("unknown word '" + w + "'");
  return it->second;
}

std::optional<WordId> Vocabulary::find(const std::string& w) const {
  auto it = index_.find(w);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Corpus::Corpus(Vocabulary vocabulary, std::vector<Document> documents)
    : vocabulary_(std::move(vocabulary)), documents_(std::move(documents)) {
  const auto v = vocabulary_.size();
  for (std::size_t d = 0; d < documents_.size(); ++d) {
    for (std::size_t i = 0; i < documents_[d].tokens.size(); ++i) {
      if (documents_[d].tokens[i] >= v)
        throw ValidationError("document " + std::to_string(d) + " position " + std::to_string(i) +
                              ": token index out of vocabulary range");
    }
    total_tokens_ += documents_[d].tokens.size();
  }
}

std::vector<std::uint64_t> Corpus::term_frequency() const {
  std::vector<std::uint64_t> tf(vocabulary_.size(), 0);
  for (const auto& doc : documents_)
    for (WordId w : doc.tokens) ++tf[w];
  return tf;
}

std::vector<std::string> Corpus::decode(std::size_t d) const {
  const auto& doc = document(d);
  std::vector<std::string> out;
  out.reserve(doc.tokens.size());
  for (WordId w : doc.tokens) out.push_back(vocabulary_.word(w));
  return out;
}

Corpus build_corpus(std::span<const RawDocument> raw_docs, std::uint32_t min_count,
                    const std::unordered_set<std::string>& stopwords) {
  if (raw_docs.empty()) throw EmptyCorpusError("empty corpus: no documents");
  if (min_count < 1) throw ValidationError("min_count must be >= 1");

  // First-appearance order over candidate words, with document frequencies.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::uint32_t> df;
  std::unordered_map<std::string, std::size_t> last_doc;
  for (std::size_t d = 0; d < raw_docs.size(); ++d) {
    for (const auto& tok : raw_docs[d].tokens) {
      if (stopwords.count(tok)) continue;
      auto [it, inserted] = last_doc.try_emplace(tok, d);
      if (inserted) {
        order.push_back(tok);
        df[tok] = 1;
      } else if (it->second != d) {
        it->second = d;
        ++df[tok];
      }
    }
  }

  std::vector<std::string> words;
  std::vector<std::uint32_t> freqs;
  for (const auto& w : order) {
    if (df[w] >= min_count) {
      words.push_back(w);
      freqs.push_back(df[w]);
    }
  }
  if (words.empty()) throw EmptyCorpusError("empty corpus: no tokens survive filtering");

  Vocabulary vocab(std::move(words), std::move(freqs));
  std::vector<Document> docs;
  docs.reserve(raw_docs.size());
  for (const auto& raw : raw_docs) {
    Document doc{raw.id, {}};
    doc.tokens.reserve(raw.tokens.size());
    for (const auto& tok : raw.tokens) {
      if (stopwords.count(tok)) continue;
      if (auto id = vocab.find(tok)) doc.tokens.push_back(*id);
    }
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(vocab), std::move(docs));
}

CooccurrenceIndex::CooccurrenceIndex(const Corpus& corpus)
    : doc_count_(corpus.num_documents()), postings_(corpus.vocabulary_size()) {
  if (doc_count_ == 0) throw EmptyCorpusError();
  std::vector<std::uint32_t> last(corpus.vocabulary_size(), UINT32_MAX);
  for (std::size_t d = 0; d < doc_count_; ++d) {
    const auto doc_id = static_cast<std::uint32_t>(d);
    for (WordId w : corpus.document(d).tokens) {
      if (last[w] == doc_id) continue;
      last[w] = doc_id;
      postings_[w].push_back(doc_id);
    }
  }
}

std::uint32_t CooccurrenceIndex::single_count(WordId w) const {
  if (w >= postings_.size()) throw ValidationError("word index " + std::to_string(w) + " out of range");
  return static_cast<std::uint32_t>(postings_[w].size());
}

std::uint32_t CooccurrenceIndex::pair_count(WordId i, WordId j) const {
  if (i >= postings_.size() || j >= postings_.size())
    throw ValidationError("word index out of range in pair_count");
  if (i == j) throw ValidationError("pair_count: self-pairs are not stored");
  const auto& a = postings_[i];
  const auto& b = postings_[j];
  std::uint32_t n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

std::map<std::pair<WordId, WordId>, std::uint32_t> CooccurrenceIndex::nonzero_pairs() const {
  std::vector<std::vector<WordId>> doc_words(doc_count_);
  for (WordId w = 0; w < postings_.size(); ++w)
    for (auto d : postings_[w]) doc_words[d].push_back(w);
  std::map<std::pair<WordId, WordId>, std::uint32_t> pairs;
  for (const auto& words : doc_words)
    for (std::size_t a = 0; a < words.size(); ++a)
      for (std::size_t b = a + 1; b < words.size(); ++b) ++pairs[{words[a], words[b]}];
  return pairs;
}

std::vector<RawDocument> parse_jsonl(std::istream& in) {
  std::vector<RawDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      RawDocument doc;
      doc.id = j.at("id").get<std::string>();
      doc.tokens = j.at("tokens").get<std::vector<std::string>>();
      docs.push_back(std::move(doc));
    } catch (const json::exception& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

std::vector<RawDocument> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open corpus file " + path.string());
  return parse_jsonl(in);
}

std::unordered_set<std::string> read_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open stop-word file " + path.string());
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

void save_bundle(const Corpus& corpus, const std::filesystem::path& path) {
  json j;
  j["format"] = "topicloop-corpus";
  j["version"] = 1;
  j["vocabulary"] = corpus.vocabulary().words();
  j["doc_frequency"] = corpus.vocabulary().doc_frequency();
  json docs = json::array();
  for (const auto& doc : corpus.documents()) docs.push_back({{"id", doc.id}, {"tokens", doc.tokens}});
  j["documents"] = std::move(docs);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write bundle " + path.string());
  out << j.dump() << '\n';
}

Corpus load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open bundle " + path.string());
  try {
    const json j = json::parse(in);
    if (j.value("format", "") != "topicloop-corpus") throw FormatError(path.string() + " is not a corpus bundle");
    Vocabulary vocab(j.at("vocabulary").get<std::vector<std::string>>(),
                     j.at("doc_frequency").get<std::vector<std::uint32_t>>());
    std::vector<Document> docs;
    for (const auto& d : j.at("documents"))
      docs.push_back({d.at("id").get<std::string>(), d.at("tokens").get<std::vector<WordId>>()});
    return Corpus(std::move(vocab), std::move(docs));
  } catch (const json::exception& e) {
    throw FormatError("bundle " + path.string() + ": " + e.what());
  }
}

}  // namespace topicloop
