#include "topicloop/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace topicloop {

namespace {

void require_seen(const CooccurrenceIndex& index, WordId w) {
  if (w >= index.vocabulary_size()) throw ValidationError("unknown word index " + std::to_string(w));
  if (index.single_count(w) == 0) throw ValidationError("word index " + std::to_string(w) + " never occurs");
}

}  // namespace

double pmi(const CooccurrenceIndex& index, WordId wi, WordId wj, double epsilon) {
  require_seen(index, wi);
  require_seen(index, wj);
  const double n = static_cast<double>(index.doc_count());
  const double pi = index.single_count(wi) / n;
  const double pj = index.single_count(wj) / n;
  if (wi == wj) return -std::log(pi);
  const double joint = index.pair_count(wi, wj) / n + epsilon;
  return std::log(joint / (pi * pj));
}

double npmi(const CooccurrenceIndex& index, WordId wi, WordId wj, double epsilon) {
  require_seen(index, wi);
  require_seen(index, wj);
  if (wi == wj) return 1.0;
  const auto joint_count = index.pair_count(wi, wj);
  if (joint_count == index.doc_count()) return 1.0;
  const double joint = joint_count / static_cast<double>(index.doc_count()) + epsilon;
  return std::clamp(pmi(index, wi, wj, epsilon) / -std::log(joint), -1.0, 1.0);
}

CoherenceResult topic_coherence(const CooccurrenceIndex& index, std::span<const WordId> topic_words) {
  CoherenceResult out;
  std::vector<WordId> ids;
  for (WordId w : topic_words) {
    if (w >= index.vocabulary_size() || index.single_count(w) == 0) {
      out.skipped.push_back(std::to_string(w));
      continue;
    }
    ids.push_back(w);
  }
  // Sorted, de-duplicated ids fix the summation order.
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (std::size_t b = a + 1; b < ids.size(); ++b) {
      out.sum += npmi(index, ids[a], ids[b]);
      ++out.pairs;
    }
  }
  if (out.pairs > 0) out.mean = out.sum / static_cast<double>(out.pairs);
  return out;
}

CoherenceResult topic_coherence(const CooccurrenceIndex& index, const Vocabulary& vocab,
                                std::span<const std::string> topic_words) {
  std::vector<WordId> ids;
  std::vector<std::string> skipped;
  for (const auto& w : topic_words) {
    auto id = vocab.find(w);
    if (!id || *id >= index.vocabulary_size() || index.single_count(*id) == 0) {
      skipped.push_back(w);
      continue;
    }
    ids.push_back(*id);
  }
  auto out = topic_coherence(index, ids);
  out.skipped = std::move(skipped);
  return out;
}

DescentRates descent_rate(std::span<const double> trace) {
  if (trace.size() < 2) throw ValidationError("descent_rate: need at least two trace points");
  for (double v : trace)
    if (!(v > 0.0)) throw ValidationError("descent_rate: trace values must be positive");
  DescentRates out;
  for (std::size_t k = 1; k < trace.size(); ++k) out.rates.push_back((trace[k - 1] - trace[k]) / trace[k - 1]);
  double total = 0.0;
  for (double r : out.rates) total += r;
  out.mean = total / static_cast<double>(out.rates.size());
  out.cumulative = (trace.front() - trace.back()) / trace.front();
  return out;
}

CoherenceSnapshot model_coherence(const TopicModel& model, const CooccurrenceIndex& index, std::size_t top_n,
                                  int pass) {
  CoherenceSnapshot snap;
  snap.pass = pass;
  double total = 0.0;
  std::size_t defined = 0;
  for (Eigen::Index t = 0; t < model.num_topics(); ++t) {
    const auto ids = top_word_ids(model, t, top_n);
    const auto c = topic_coherence(index, ids);
    snap.per_topic.push_back(c.mean);
    snap.sum_npmi += c.sum;
    if (c.mean) {
      total += *c.mean;
      ++defined;
    }
  }
  snap.mean_npmi = defined ? total / static_cast<double>(defined) : std::numeric_limits<double>::quiet_NaN();
  return snap;
}

const CoherenceSnapshot* MetricReport::coherence_at(int pass) const {
  for (const auto& c : coherence)
    if (c.pass == pass) return &c;
  return nullptr;
}

std::optional<double> MetricReport::perplexity_at(int pass) const {
  for (const auto& [p, v] : per_pass_perplexity)
    if (p == pass) return v;
  return std::nullopt;
}

std::optional<double> MetricReport::heldout_perplexity_at(int pass) const {
  for (const auto& [p, v] : heldout_perplexity)
    if (p == pass) return v;
  return std::nullopt;
}

nlohmann::json to_json(const MetricReport& r) {
  using nlohmann::json;
  json j;
  j["config"] = {{"method", r.method}, {"eta_mode", r.eta_mode}, {"beta", r.beta},
                 {"alpha", r.alpha},   {"num_topics", r.num_topics}, {"seed", r.seed}};
  json trace = json::array();
  for (const auto& [pass, v] : r.per_pass_perplexity) trace.push_back({{"pass", pass}, {"perplexity", v}});
  j["per_pass_perplexity"] = std::move(trace);
  if (!r.heldout_perplexity.empty()) {
    json held = json::array();
    for (const auto& [pass, v] : r.heldout_perplexity) held.push_back({{"pass", pass}, {"perplexity", v}});
    j["heldout_perplexity"] = std::move(held);
  }
  json coh = json::array();
  for (const auto& c : r.coherence) {
    json per_topic = json::array();
    for (const auto& v : c.per_topic) per_topic.push_back(v ? json(*v) : json(nullptr));
    coh.push_back({{"pass", c.pass},
                   {"per_topic", std::move(per_topic)},
                   {"mean_npmi", std::isfinite(c.mean_npmi) ? json(c.mean_npmi) : json(nullptr)},
                   {"sum_npmi", c.sum_npmi}});
  }
  j["coherence"] = std::move(coh);
  j["descent_rates"] = r.descent.rates;
  j["mean_descent_rate"] = r.descent.mean;
  j["cumulative_descent"] = r.descent.cumulative;
  return j;
}

std::string trace_csv(const MetricReport& r) {
  std::string out = "pass,perplexity,descent_rate\n";
  char buf[128];
  for (std::size_t k = 0; k < r.per_pass_perplexity.size(); ++k) {
    const auto& [pass, v] = r.per_pass_perplexity[k];
    if (k == 0 || k > r.descent.rates.size()) {
      std::snprintf(buf, sizeof buf, "%d,%.6f,\n", pass, v);
    } else {
      std::snprintf(buf, sizeof buf, "%d,%.6f,%.8f\n", pass, v, r.descent.rates[k - 1]);
    }
    out += buf;
  }
  return out;
}

}  // namespace topicloop
