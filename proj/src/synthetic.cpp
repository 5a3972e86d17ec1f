#include <algorithm>
#include <cmath>
#include <cstdio>

#include "topicloop/experiment.hpp"

namespace topicloop {

void SyntheticSpec::validate() const {
  if (num_topics < 1 || vocabulary_size < 1 || num_docs < 1 || tokens_per_doc < 1)
    throw ValidationError("synthetic spec: sizes must be positive");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ValidationError("synthetic spec: alpha and beta must be positive");
  if (num_topics > vocabulary_size) throw ValidationError("synthetic spec: more topics than words");
}

namespace {

/// Symmetric Dirichlet draw, normalized in log space.
Eigen::VectorXd dirichlet(Rng& rng, Eigen::Index n, double concentration) {
  Eigen::VectorXd logs(n);
  for (Eigen::Index i = 0; i < n; ++i) logs(i) = rng.log_gamma(concentration);
  const double top = logs.maxCoeff();
  Eigen::VectorXd p = (logs.array() - top).exp().matrix();
  return p / p.sum();
}

std::size_t draw(Rng& rng, const std::vector<double>& cdf) {
  const double u = rng.uniform01() * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

std::vector<double> cumulative(const Eigen::VectorXd& p) {
  std::vector<double> cdf(static_cast<std::size_t>(p.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) cdf[static_cast<std::size_t>(i)] = acc += p(i);
  return cdf;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Eigen::Index T = spec.num_topics;
  const Eigen::Index V = spec.vocabulary_size;
  Rng rng(spec.seed);

  TopicModel::Matrix phi(T, V);
  std::vector<std::vector<double>> phi_cdf;
  for (Eigen::Index t = 0; t < T; ++t) {
    phi.row(t) = dirichlet(rng, V, spec.beta).transpose();
    phi_cdf.push_back(cumulative(phi.row(t).transpose()));
  }

  const int width = static_cast<int>(std::to_string(V - 1).size());
  std::vector<std::string> names(static_cast<std::size_t>(V));
  for (Eigen::Index w = 0; w < V; ++w) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "w%0*ld", width, static_cast<long>(w));
    names[static_cast<std::size_t>(w)] = buf;
  }

  TopicModel::Matrix theta(spec.num_docs, T);
  std::vector<RawDocument> raw(static_cast<std::size_t>(spec.num_docs));
  for (int d = 0; d < spec.num_docs; ++d) {
    const Eigen::VectorXd mix = dirichlet(rng, T, spec.alpha);
    theta.row(d) = mix.transpose();
    const auto mix_cdf = cumulative(mix);
    char id[32];
    std::snprintf(id, sizeof id, "doc%06d", d);
    raw[static_cast<std::size_t>(d)].id = id;
    auto& tokens = raw[static_cast<std::size_t>(d)].tokens;
    tokens.reserve(static_cast<std::size_t>(spec.tokens_per_doc));
    for (int i = 0; i < spec.tokens_per_doc; ++i) {
      const auto z = draw(rng, mix_cdf);
      tokens.push_back(names[draw(rng, phi_cdf[z])]);
    }
  }

  SyntheticCorpus out{build_corpus(raw, 1, {}), {}};
  const auto& vocab = out.corpus.vocabulary();
  const auto Vseen = static_cast<Eigen::Index>(vocab.size());
  out.truth.theta = theta;
  out.truth.phi.resize(T, Vseen);
  for (Eigen::Index j = 0; j < Vseen; ++j) {
    const auto original = std::stol(vocab.word(static_cast<WordId>(j)).substr(1));
    out.truth.phi.col(j) = phi.col(original);
  }
  for (Eigen::Index t = 0; t < T; ++t) out.truth.phi.row(t) /= out.truth.phi.row(t).sum();
  return out;
}

}  // namespace topicloop
