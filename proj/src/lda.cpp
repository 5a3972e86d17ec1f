#include "topicloop/lda.hpp"

#include <fstream>
#include <json.hpp>
#include <limits>

namespace topicloop {

using nlohmann::json;

void Hyperparams::validate() const {
  if (num_topics < 1) throw ValidationError("num_topics must be >= 1");
  if (!(alpha > 0.0)) throw ValidationError("alpha must be > 0");
  if (eta && !(*eta > 0.0)) throw ValidationError("eta must be > 0 when given");
}

SamplerState::SamplerState(const Corpus& corpus, const Assignments& assignments,
                           const Hyperparams& hyper, std::uint64_t seed)
    : hyper_(hyper), vocab_size_(corpus.vocabulary_size()), seed_(seed), rng_(seed) {
  hyper_.validate();
  const std::size_t N = corpus.num_documents();
  const auto T = static_cast<TopicId>(hyper_.num_topics);
  if (assignments.size() != N)
    throw ValidationError("assignments cover " + std::to_string(assignments.size()) + " documents, corpus has " +
                          std::to_string(N));
  if (corpus.total_tokens() > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()))
    throw ValidationError("corpus too large for 32-bit counts");

  offsets_.reserve(N + 1);
  offsets_.push_back(0);
  words_.reserve(corpus.total_tokens());
  topics_.reserve(corpus.total_tokens());
  n_wt_ = CountMatrix::Zero(static_cast<Eigen::Index>(vocab_size_), T);
  n_td_ = CountMatrix::Zero(static_cast<Eigen::Index>(N), T);
  n_t_ = CountVector::Zero(T);

  for (std::size_t d = 0; d < N; ++d) {
    const auto& tokens = corpus.document(d).tokens;
    const auto& labels = assignments[d];
    if (labels.size() != tokens.size())
      throw ValidationError("document " + std::to_string(d) + ": " + std::to_string(labels.size()) +
                            " labels for " + std::to_string(tokens.size()) + " tokens");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const TopicId t = labels[i];
      if (t >= T)
        throw ValidationError("document " + std::to_string(d) + " position " + std::to_string(i) + ": label " +
                              std::to_string(t) + " >= num_topics " + std::to_string(T));
      words_.push_back(tokens[i]);
      topics_.push_back(t);
      ++n_wt_(tokens[i], t);
      ++n_td_(static_cast<Eigen::Index>(d), t);
      ++n_t_(t);
    }
    offsets_.push_back(words_.size());
  }
}

Assignments SamplerState::assignments() const {
  Assignments out(num_documents());
  for (std::size_t d = 0; d < out.size(); ++d) {
    auto labels = z(d);
    out[d].assign(labels.begin(), labels.end());
  }
  return out;
}

Eigen::VectorXd conditional_distribution(const SamplerState& state, std::size_t doc, std::size_t pos) {
  if (doc >= state.num_documents()) throw ValidationError("document index " + std::to_string(doc) + " out of range");
  if (pos >= state.doc_length(doc))
    throw ValidationError("document " + std::to_string(doc) + ": position " + std::to_string(pos) + " out of range");

  const int T = state.num_topics();
  const double alpha = state.hyper().alpha;
  const double beta = state.hyper().beta();
  const double V = static_cast<double>(state.vocabulary_size());
  const WordId w = state.words(doc)[pos];
  const TopicId current = state.z(doc)[pos];
  const auto d = static_cast<Eigen::Index>(doc);

  const double doc_total = static_cast<double>(state.doc_length(doc)) - 1.0;
  Eigen::VectorXd p(T);
  for (int t = 0; t < T; ++t) {
    const double self = (static_cast<TopicId>(t) == current) ? 1.0 : 0.0;
    const double word_topic = state.n_wt()(w, t) - self;
    const double topic_total = static_cast<double>(state.n_t()(t)) - self;
    const double doc_topic = state.n_td()(d, t) - self;
    p(t) = (word_topic + beta) / (topic_total + V * beta) * ((doc_topic + alpha) / (doc_total + T * alpha));
  }
  return p / p.sum();
}

void gibbs_pass(SamplerState& s) {
  const int T = s.hyper_.num_topics;
  const double alpha = s.hyper_.alpha;
  const double beta = s.hyper_.beta();
  const double vbeta = static_cast<double>(s.vocab_size_) * beta;

  // 1 / (n_t + |V| beta), refreshed for the two topics touched per draw.
  std::vector<double> inv_denom(T);
  for (int t = 0; t < T; ++t) inv_denom[t] = 1.0 / (static_cast<double>(s.n_t_(t)) + vbeta);
  std::vector<double> cdf(T);

  for (std::size_t d = 0; d < s.num_documents(); ++d) {
    std::int32_t* doc_counts = s.n_td_.row(static_cast<Eigen::Index>(d)).data();
    for (std::size_t i = s.offsets_[d]; i < s.offsets_[d + 1]; ++i) {
      const WordId w = s.words_[i];
      std::int32_t* word_counts = s.n_wt_.row(w).data();
      const TopicId old_t = s.topics_[i];

      --word_counts[old_t];
      --doc_counts[old_t];
      --s.n_t_(old_t);
      inv_denom[old_t] = 1.0 / (static_cast<double>(s.n_t_(old_t)) + vbeta);

      double total = 0.0;
      for (int t = 0; t < T; ++t) {
        total += (word_counts[t] + beta) * (doc_counts[t] + alpha) * inv_denom[t];
        cdf[t] = total;
      }
      const double u = s.rng_.uniform01() * total;
      int new_t = 0;
      while (new_t < T - 1 && cdf[new_t] <= u) ++new_t;

      ++word_counts[new_t];
      ++doc_counts[new_t];
      ++s.n_t_(new_t);
      inv_denom[new_t] = 1.0 / (static_cast<double>(s.n_t_(new_t)) + vbeta);
      s.topics_[i] = static_cast<TopicId>(new_t);
    }
  }
  ++s.passes_;
}

TopicModel::Matrix fold_in(const TopicModel& model, const Corpus& documents, double alpha, int passes,
                           std::uint64_t seed) {
  const auto T = model.num_topics();
  if (T < 1) throw ValidationError("fold_in: model has no topics");
  if (static_cast<std::size_t>(model.vocabulary_size()) != documents.vocabulary_size())
    throw ValidationError("fold_in: model vocabulary size does not match the documents");
  if (!(alpha > 0.0)) throw ValidationError("fold_in: alpha must be > 0");
  if (passes < 0) throw ValidationError("fold_in: passes must be >= 0");

  Rng rng(seed);
  TopicModel::Matrix theta(static_cast<Eigen::Index>(documents.num_documents()), T);
  std::vector<std::int32_t> counts(static_cast<std::size_t>(T));
  std::vector<TopicId> z;
  std::vector<double> cdf(static_cast<std::size_t>(T));
  for (std::size_t d = 0; d < documents.num_documents(); ++d) {
    const auto& tokens = documents.document(d).tokens;
    std::fill(counts.begin(), counts.end(), 0);
    z.resize(tokens.size());
    for (auto& t : z) {
      t = static_cast<TopicId>(rng.uniform_index(static_cast<std::uint64_t>(T)));
      ++counts[t];
    }
    for (int pass = 0; pass < passes; ++pass) {
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        --counts[z[i]];
        double total = 0.0;
        for (Eigen::Index t = 0; t < T; ++t) {
          total += model.phi(t, tokens[i]) * (counts[static_cast<std::size_t>(t)] + alpha);
          cdf[static_cast<std::size_t>(t)] = total;
        }
        const double u = rng.uniform01() * total;
        std::size_t t = 0;
        while (t + 1 < cdf.size() && cdf[t] <= u) ++t;
        z[i] = static_cast<TopicId>(t);
        ++counts[t];
      }
    }
    const double denom = static_cast<double>(tokens.size()) + static_cast<double>(T) * alpha;
    for (Eigen::Index t = 0; t < T; ++t)
      theta(static_cast<Eigen::Index>(d), t) = (counts[static_cast<std::size_t>(t)] + alpha) / denom;
  }
  return theta;
}

namespace {

json hyper_to_json(const Hyperparams& h) {
  json j{{"num_topics", h.num_topics}, {"alpha", h.alpha}};
  j["eta"] = h.eta ? json(*h.eta) : json(nullptr);
  j["beta"] = h.beta();
  return j;
}

Hyperparams hyper_from_json(const json& j) {
  Hyperparams h;
  h.num_topics = j.at("num_topics").get<int>();
  h.alpha = j.at("alpha").get<double>();
  if (j.contains("eta") && !j.at("eta").is_null()) h.eta = j.at("eta").get<double>();
  h.validate();
  return h;
}

}  // namespace

void save_checkpoint(const SamplerState& state, const std::filesystem::path& path) {
  json j;
  j["format"] = "topicloop-checkpoint";
  j["version"] = 1;
  j["hyper"] = hyper_to_json(state.hyper());
  j["seed"] = state.seed();
  j["passes"] = state.passes_done();
  j["rng_state"] = state.rng().save_state();
  j["z"] = state.assignments();
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

SamplerState load_checkpoint(const Corpus& corpus, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  try {
    const json j = json::parse(in);
    if (j.value("format", "") != "topicloop-checkpoint") throw FormatError(path.string() + " is not a checkpoint");
    SamplerState state(corpus, j.at("z").get<Assignments>(), hyper_from_json(j.at("hyper")),
                       j.at("seed").get<std::uint64_t>());
    state.passes_ = j.at("passes").get<std::uint64_t>();
    state.rng_.load_state(j.at("rng_state").get<std::string>());
    return state;
  } catch (const json::exception& e) {
    throw FormatError("checkpoint " + path.string() + ": " + e.what());
  }
}

void save_model(const TopicModel& model, const Vocabulary& vocab, const Hyperparams& hyper,
                const std::filesystem::path& path) {
  auto rows = [](const TopicModel::Matrix& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<double> row(m.row(r).data(), m.row(r).data() + m.cols());
      out.push_back(std::move(row));
    }
    return out;
  };
  json j;
  j["format"] = "topicloop-model";
  j["version"] = 1;
  j["hyper"] = hyper_to_json(hyper);
  j["vocabulary"] = vocab.words();
  j["theta"] = rows(model.theta);
  j["phi"] = rows(model.phi);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write model " + path.string());
  out << j.dump() << '\n';
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model " + path.string());
  try {
    const json j = json::parse(in);
    if (j.value("format", "") != "topicloop-model") throw FormatError(path.string() + " is not a model file");
    LoadedModel out;
    out.hyper = hyper_from_json(j.at("hyper"));
    out.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    auto read = [](const json& rows, Eigen::Index cols) {
      TopicModel::Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto row = rows[r].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != cols) throw FormatError("model: ragged matrix row");
        for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = row[c];
      }
      return m;
    };
    const auto T = static_cast<Eigen::Index>(out.hyper.num_topics);
    out.model.theta = read(j.at("theta"), T);
    out.model.phi = read(j.at("phi"), static_cast<Eigen::Index>(out.vocabulary.size()));
    if (out.model.phi.rows() != T) throw FormatError("model: phi has wrong number of topics");
    return out;
  } catch (const json::exception& e) {
    throw FormatError("model " + path.string() + ": " + e.what());
  }
}

}  // namespace topicloop
