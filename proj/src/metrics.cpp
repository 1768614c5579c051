#include "rismap/metrics.hpp"

#include <cmath>
#include <limits>

namespace rismap {

std::vector<int> solve_assignment(const MatX& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("solve_assignment: square matrix required");
  if (n == 0) return {};

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
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
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

GospaResult gospa(const std::vector<Vec3>& estimates,
                  const std::vector<Vec3>& truth, const GospaConfig& cfg) {
  const int n_e = static_cast<int>(estimates.size());
  const int n_t = static_cast<int>(truth.size());
  const double cp = std::pow(cfg.c, cfg.p);
  const double penalty = cp / cfg.alpha;

  GospaResult res;
  if (n_e == 0 && n_t == 0) return res;

  // Square matrix with one dummy row per estimate and one dummy column per
  // truth point; dummies carry the cardinality penalty, dummy-dummy is free.
  const int n = n_e + n_t;
  MatX cost(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i < n_e && j < n_t) {
        const double d = (estimates[i] - truth[j]).norm();
        cost(i, j) = std::pow(std::min(d, cfg.c), cfg.p);
      } else if (i < n_e || j < n_t) {
        cost(i, j) = penalty;
      } else {
        cost(i, j) = 0.0;
      }
    }
  }

  const std::vector<int> assign = solve_assignment(cost);
  for (int i = 0; i < n_e; ++i) {
    const int j = assign[i];
    if (j < n_t) {
      const double d = (estimates[i] - truth[j]).norm();
      if (d < cfg.c) {
        res.localization += std::pow(d, cfg.p);
      } else {
        res.missed += penalty;
        res.false_alarm += penalty;
      }
    } else {
      res.false_alarm += penalty;
    }
  }
  for (int i = n_e; i < n; ++i)
    if (assign[i] < n_t) res.missed += penalty;

  res.total = std::pow(res.localization + res.missed + res.false_alarm, 1.0 / cfg.p);
  return res;
}

}  // namespace rismap
