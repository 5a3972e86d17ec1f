#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "topicloop/initializers.hpp"

namespace topicloop {

namespace {

constexpr int kSubspaceIterations = 60;
constexpr Eigen::Index kOversample = 8;
constexpr std::uint64_t kEmbeddingSeed = 0x5eed'e3b0'c442'98fcULL;

/// Column-wise modified Gram-Schmidt. Every step is elementwise down a
/// column, so equal input rows stay bit-identical.
void orthonormalize(RowMatrixXd& x) {
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index p = 0; p < c; ++p) x.col(c) -= x.col(p).dot(x.col(c)) * x.col(p);
    const double norm = x.col(c).norm();
    if (norm > 1e-300) {
      x.col(c) /= norm;
    } else {
      x.col(c).setZero();
    }
  }
}

}  // namespace

WordEmbedding embed_vocabulary(const Corpus& corpus, int dim) {
  if (dim < 2) throw ValidationError("embed_vocabulary: dim must be >= 2");
  const auto V = static_cast<Eigen::Index>(corpus.vocabulary_size());
  if (V == 0) throw EmptyCorpusError();

  WordEmbedding out;
  Eigen::Index k = dim;
  if (V < k) {
    out.warnings.push_back("embed_vocabulary: dim " + std::to_string(dim) + " reduced to vocabulary size " +
                           std::to_string(V));
    k = V;
  }

  // Dampened co-occurrence counts; diagonal entries are document frequencies.
  const CooccurrenceIndex index(corpus);
  std::vector<Eigen::Triplet<double>> triplets;
  for (const auto& [pair, count] : index.nonzero_pairs()) {
    const double v = std::log1p(static_cast<double>(count));
    triplets.emplace_back(pair.first, pair.second, v);
    triplets.emplace_back(pair.second, pair.first, v);
  }
  for (Eigen::Index w = 0; w < V; ++w)
    triplets.emplace_back(w, w, std::log1p(static_cast<double>(index.single_count(static_cast<WordId>(w)))));
  Eigen::SparseMatrix<double> m(V, V);
  m.setFromTriplets(triplets.begin(), triplets.end());

  const Eigen::Index width = std::min(V, k + kOversample);
  Rng rng(kEmbeddingSeed);
  RowMatrixXd basis(V, width);
  for (Eigen::Index i = 0; i < V; ++i)
    for (Eigen::Index c = 0; c < width; ++c) basis(i, c) = rng.normal();
  orthonormalize(basis);
  for (int it = 0; it < kSubspaceIterations; ++it) {
    basis = m * basis;
    orthonormalize(basis);
  }

  // Rayleigh-Ritz on the converged subspace.
  const Eigen::MatrixXd projected = basis.transpose() * (m * basis);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (projected + projected.transpose()));
  const auto& values = solver.eigenvalues();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(width));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(values(a)) > std::abs(values(b)); });

  Eigen::MatrixXd rotation(width, k);
  Eigen::VectorXd scale(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    rotation.col(c) = solver.eigenvectors().col(order[static_cast<std::size_t>(c)]);
    scale(c) = std::sqrt(std::abs(values(order[static_cast<std::size_t>(c)])));
  }
  out.vectors = basis * rotation;
  for (Eigen::Index c = 0; c < k; ++c) {
    const double s = out.vectors.col(c).sum();
    const double sign = s < 0.0 ? -1.0 : 1.0;
    out.vectors.col(c) *= sign * scale(c);
  }
  for (Eigen::Index i = 0; i < V; ++i) {
    const double norm = out.vectors.row(i).norm();
    if (norm > 0.0) out.vectors.row(i) /= norm;
  }
  return out;
}

}  // namespace topicloop
