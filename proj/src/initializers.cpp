#include "topicloop/initializers.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "topicloop/parallel.hpp"

namespace topicloop {

using nlohmann::json;

std::string to_string(ClusterLabel label) {
  switch (label) {
    case ClusterLabel::Unevaluated: return "unevaluated";
    case ClusterLabel::Accepted: return "accepted";
    case ClusterLabel::Rejected: return "rejected";
  }
  return "unevaluated";
}

ClusterLabel cluster_label_from_string(const std::string& s) {
  if (s == "unevaluated") return ClusterLabel::Unevaluated;
  if (s == "accepted") return ClusterLabel::Accepted;
  if (s == "rejected") return ClusterLabel::Rejected;
  throw ValidationError("unknown cluster label '" + s + "'");
}

void ClusterSet::validate(std::size_t vocabulary_size, int num_topics) const {
  if (clusters.size() != static_cast<std::size_t>(num_topics))
    throw ValidationError("cluster set has " + std::to_string(clusters.size()) + " clusters, expected " +
                          std::to_string(num_topics));
  if (!labels.empty() && labels.size() != clusters.size())
    throw ValidationError("cluster set: labels do not match clusters");
  std::vector<bool> used(vocabulary_size, false);
  for (std::size_t t = 0; t < clusters.size(); ++t) {
    for (WordId w : clusters[t]) {
      if (w >= vocabulary_size) throw ValidationError("cluster " + std::to_string(t) + ": word index out of range");
      if (used[w]) throw ValidationError("cluster set: word " + std::to_string(w) + " is in more than one cluster");
      used[w] = true;
    }
  }
}

json clusters_to_json(const ClusterSet& clusters, const Vocabulary& vocab) {
  json out;
  out["clusters"] = json::array();
  for (const auto& c : clusters.clusters) {
    json words = json::array();
    for (WordId w : c) words.push_back(vocab.word(w));
    out["clusters"].push_back(std::move(words));
  }
  out["labels"] = json::array();
  for (std::size_t t = 0; t < clusters.size(); ++t)
    out["labels"].push_back(to_string(clusters.labels.empty() ? ClusterLabel::Unevaluated : clusters.labels[t]));
  return out;
}

ClusterSet clusters_from_json(const json& j, const Vocabulary& vocab) {
  ClusterSet out;
  try {
    for (const auto& c : j.at("clusters")) {
      std::vector<WordId> ids;
      for (const auto& w : c) ids.push_back(vocab.index_of(w.get<std::string>()));
      out.clusters.push_back(std::move(ids));
    }
    if (j.contains("labels")) {
      bool any_evaluated = false;
      for (const auto& l : j.at("labels")) {
        out.labels.push_back(cluster_label_from_string(l.get<std::string>()));
        any_evaluated = any_evaluated || out.labels.back() != ClusterLabel::Unevaluated;
      }
      // All-unevaluated round-trips to the unlabeled form.
      if (!any_evaluated) out.labels.clear();
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("cluster set: ") + e.what());
  }
  out.validate(vocab.size(), static_cast<int>(out.clusters.size()));
  return out;
}

void save_clusters(const ClusterSet& clusters, const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << clusters_to_json(clusters, vocab).dump(2) << '\n';
}

ClusterSet load_clusters(const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return clusters_from_json(json::parse(in), vocab);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Assignments random_init(const Corpus& corpus, int num_topics, std::uint64_t seed) {
  if (num_topics < 1) throw ValidationError("random_init: num_topics must be >= 1");
  Rng rng(seed);
  Assignments out(corpus.num_documents());
  for (std::size_t d = 0; d < out.size(); ++d) {
    out[d].resize(corpus.document(d).tokens.size());
    for (auto& z : out[d]) z = static_cast<TopicId>(rng.uniform_index(static_cast<std::uint64_t>(num_topics)));
  }
  return out;
}

Assignments cluster_init(const Corpus& corpus, const ClusterSet& clusters, std::uint64_t seed) {
  const int T = static_cast<int>(clusters.size());
  clusters.validate(corpus.vocabulary_size(), T);
  constexpr TopicId kNone = UINT32_MAX;
  std::vector<TopicId> topic_of(corpus.vocabulary_size(), kNone);
  for (std::size_t t = 0; t < clusters.size(); ++t)
    if (clusters.seeds_topic(t))
      for (WordId w : clusters.clusters[t]) topic_of[w] = static_cast<TopicId>(t);

  // Same draw sequence as random_init, overridden where a cluster applies.
  auto out = random_init(corpus, T, seed);
  for (std::size_t d = 0; d < out.size(); ++d) {
    const auto& tokens = corpus.document(d).tokens;
    for (std::size_t i = 0; i < tokens.size(); ++i)
      if (topic_of[tokens[i]] != kNone) out[d][i] = topic_of[tokens[i]];
  }
  return out;
}

double PairwiseSimilarityJudge::score(std::span<const std::string> words) const {
  if (words.empty()) throw ValidationError("PairwiseSimilarityJudge: empty word list");
  if (words.size() == 1) return 1.0;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < words.size(); ++i)
    for (std::size_t j = i + 1; j < words.size(); ++j, ++pairs) total += sim_(words[i], words[j]);
  return std::clamp(total / static_cast<double>(pairs), 0.0, 1.0);
}

GuidedInitResult llm_guided_init(const Corpus& corpus, const ClusterSet& clusters, const CoherenceJudge& judge,
                                 std::uint64_t seed, const GuidedInitOptions& options) {
  if (!(options.threshold >= 0.0 && options.threshold <= 1.0))
    throw ValidationError("llm_guided_init: threshold must lie in [0, 1]");
  if (options.max_words_per_prompt < 1) throw ValidationError("llm_guided_init: max_words_per_prompt must be >= 1");
  clusters.validate(corpus.vocabulary_size(), static_cast<int>(clusters.size()));

  const auto tf = corpus.term_frequency();
  const auto& vocab = corpus.vocabulary();
  const std::size_t T = clusters.size();

  GuidedInitResult result;
  result.clusters.clusters = clusters.clusters;
  result.clusters.labels.assign(T, ClusterLabel::Rejected);
  result.scores.assign(T, std::nullopt);
  std::vector<std::string> errors(T);

  parallel_for(T, options.max_concurrency, [&](std::size_t t) {
    std::vector<WordId> ids = clusters.clusters[t];
    if (ids.empty()) return;
    std::stable_sort(ids.begin(), ids.end(), [&](WordId a, WordId b) { return tf[a] > tf[b] || (tf[a] == tf[b] && a < b); });
    if (ids.size() > options.max_words_per_prompt) ids.resize(options.max_words_per_prompt);
    std::vector<std::string> words;
    for (WordId w : ids) words.push_back(vocab.word(w));
    try {
      const double s = judge.score(words);
      result.scores[t] = s;
      result.clusters.labels[t] = s >= options.threshold ? ClusterLabel::Accepted : ClusterLabel::Rejected;
    } catch (const Error& e) {
      result.clusters.labels[t] = ClusterLabel::Unevaluated;
      errors[t] = "cluster " + std::to_string(t) + ": " + e.kind() + ": " + e.what();
    }
  });
  for (auto& e : errors)
    if (!e.empty()) result.errors.push_back(std::move(e));

  result.assignments = cluster_init(corpus, result.clusters, seed);
  return result;
}

}  // namespace topicloop
