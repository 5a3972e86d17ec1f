#include <algorithm>
#include <limits>
#include <numeric>

#include "topicloop/experiment.hpp"

namespace topicloop {

namespace {

/// Hungarian algorithm with row/column potentials, O(n^3).
std::vector<Eigen::Index> hungarian(const Eigen::MatrixXd& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<Eigen::Index> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = static_cast<Eigen::Index>(j - 1);
  return row_to_col;
}

std::vector<Eigen::Index> greedy(const Eigen::MatrixXd& cost) {
  const Eigen::Index n = cost.rows();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) cells.emplace_back(i, j);
  std::stable_sort(cells.begin(), cells.end(), [&](const auto& a, const auto& b) {
    return cost(a.first, a.second) < cost(b.first, b.second);
  });
  std::vector<Eigen::Index> row_to_col(static_cast<std::size_t>(n), -1);
  std::vector<bool> col_used(static_cast<std::size_t>(n), false);
  for (const auto& [i, j] : cells) {
    if (row_to_col[static_cast<std::size_t>(i)] >= 0 || col_used[static_cast<std::size_t>(j)]) continue;
    row_to_col[static_cast<std::size_t>(i)] = j;
    col_used[static_cast<std::size_t>(j)] = true;
  }
  return row_to_col;
}

}  // namespace

std::vector<Eigen::Index> solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw ValidationError("solve_assignment: cost matrix must be square");
  if (cost.rows() == 0) return {};
  return cost.rows() <= 16 ? hungarian(cost) : greedy(cost);
}

}  // namespace topicloop
