#include <limits>

#include "topicloop/initializers.hpp"

namespace topicloop {

ClusterSet kmeans_cluster(const RowMatrixXd& points, int num_clusters, std::uint64_t seed, int max_iters) {
  const Eigen::Index n = points.rows();
  const Eigen::Index k = num_clusters;
  if (k < 1) throw ValidationError("kmeans_cluster: number of clusters must be >= 1");
  if (k > n)
    throw ValidationError("kmeans_cluster: " + std::to_string(k) + " clusters requested for " + std::to_string(n) +
                          " words");
  if (!points.allFinite()) throw ValidationError("kmeans_cluster: non-finite embedding entries");

  Rng rng(seed);
  RowMatrixXd centers(k, points.cols());

  // k-means++ seeding.
  centers.row(0) = points.row(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Eigen::Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      const double u = rng.uniform01() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < std::max(1, max_iters); ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) {
        const double d = (points.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }

    // Repair empty clusters by splitting off the farthest point of the
    // largest one.
    for (;;) {
      std::vector<Eigen::Index> sizes(static_cast<std::size_t>(k), 0);
      for (auto a : assign) ++sizes[static_cast<std::size_t>(a)];
      const auto empty = std::find(sizes.begin(), sizes.end(), 0);
      if (empty == sizes.end()) break;
      const auto largest = static_cast<Eigen::Index>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      Eigen::RowVectorXd centroid = Eigen::RowVectorXd::Zero(points.cols());
      for (Eigen::Index i = 0; i < n; ++i)
        if (assign[static_cast<std::size_t>(i)] == largest) centroid += points.row(i);
      centroid /= static_cast<double>(sizes[static_cast<std::size_t>(largest)]);
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (assign[static_cast<std::size_t>(i)] != largest) continue;
        const double d = (points.row(i) - centroid).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      const auto target = static_cast<Eigen::Index>(empty - sizes.begin());
      assign[static_cast<std::size_t>(far)] = target;
      centers.row(target) = points.row(far);
      changed = true;
    }

    centers.setZero();
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      centers.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
      counts(assign[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c) centers.row(c) /= counts(c);
    if (!changed) break;
  }

  ClusterSet out;
  out.clusters.resize(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < n; ++i)
    out.clusters[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])].push_back(static_cast<WordId>(i));
  return out;
}

}  // namespace topicloop
