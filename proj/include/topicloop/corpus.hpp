#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace topicloop {

using WordId = std::uint32_t;

class Vocabulary {
 public:
  Vocabulary() = default;
  /// Words must be unique; doc_frequency is parallel to words.
  Vocabulary(std::vector<std::string> words, std::vector<std::uint32_t> doc_frequency);

  std::size_t size() const noexcept { return words_.size(); }
  const std::string& word(WordId id) const { return words_.at(id); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::vector<std::uint32_t>& doc_frequency() const noexcept { return doc_frequency_; }

  bool contains(const std::string& w) const { return index_.count(w) != 0; }
  /// Throws ValidationError for unknown words.
  WordId index_of(const std::string& w) const;
  std::optional<WordId> find(const std::string& w) const;

  bool operator==(const Vocabulary& o) const {
    return words_ == o.words_ && doc_frequency_ == o.doc_frequency_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint32_t> doc_frequency_;
  std::unordered_map<std::string, WordId> index_;
};

struct Document {
  std::string id;
  std::vector<WordId> tokens;

  bool operator==(const Document&) const = default;
};

struct RawDocument {
  std::string id;
  std::vector<std::string> tokens;
};

class Corpus {
 public:
  Corpus() = default;
  /// Validates token indices against the vocabulary.
  Corpus(Vocabulary vocabulary, std::vector<Document> documents);

  const Vocabulary& vocabulary() const noexcept { return vocabulary_; }
  const std::vector<Document>& documents() const noexcept { return documents_; }
  const Document& document(std::size_t d) const { return documents_.at(d); }
  std::size_t num_documents() const noexcept { return documents_.size(); }
  std::size_t vocabulary_size() const noexcept { return vocabulary_.size(); }
  std::size_t total_tokens() const noexcept { return total_tokens_; }

  /// Total occurrences of each word across the corpus.
  std::vector<std::uint64_t> term_frequency() const;
  std::vector<std::string> decode(std::size_t d) const;

  bool operator==(const Corpus& o) const {
    return vocabulary_ == o.vocabulary_ && documents_ == o.documents_;
  }

 private:
  Vocabulary vocabulary_;
  std::vector<Document> documents_;
  std::size_t total_tokens_ = 0;
};

/// Document-level co-occurrence statistics.
///
/// Pair counts are answered from sorted per-word posting lists, so
/// pair_count(i, j) is an exact intersection count and no quadratic pair
/// table is held in memory.
class CooccurrenceIndex {
 public:
  CooccurrenceIndex() = default;
  explicit CooccurrenceIndex(const Corpus& corpus);

  std::size_t doc_count() const noexcept { return doc_count_; }
  std::size_t vocabulary_size() const noexcept { return postings_.size(); }
  std::uint32_t single_count(WordId w) const;
  /// Documents containing both words. i == j is rejected: self-association
  /// is handled analytically by the metrics.
  std::uint32_t pair_count(WordId i, WordId j) const;
  /// All pairs (i < j) with a non-zero count. Quadratic in document length;
  /// intended for inspection and small corpora.
  std::map<std::pair<WordId, WordId>, std::uint32_t> nonzero_pairs() const;
  const std::vector<std::uint32_t>& postings(WordId w) const { return postings_.at(w); }

 private:
  std::size_t doc_count_ = 0;
  std::vector<std::vector<std::uint32_t>> postings_;
};

Corpus build_corpus(std::span<const RawDocument> raw_docs, std::uint32_t min_count,
                    const std::unordered_set<std::string>& stopwords);

inline CooccurrenceIndex build_cooccurrence(const Corpus& corpus) {
  return CooccurrenceIndex(corpus);
}

/// One JSON object {"id": ..., "tokens": [...]} per line. Blank lines are
/// skipped; a malformed line throws FormatError citing its 1-based number.
std::vector<RawDocument> read_jsonl(const std::filesystem::path& path);
std::vector<RawDocument> parse_jsonl(std::istream& in);
std::unordered_set<std::string> read_stopwords(const std::filesystem::path& path);

/// Reusable corpus bundle (JSON): vocabulary, document frequencies and the
/// encoded documents.
void save_bundle(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_bundle(const std::filesystem::path& path);

}  // namespace topicloop
