#include "symcanon/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "symcanon/error.hpp"

namespace symcanon {

CostMatrix::CostMatrix(Tensor entries) : entries_(std::move(entries)) {
  require(entries_.rank() == 2 && entries_.rows() == entries_.cols(),
          "cost matrix must be square, got " + entries_.shape_str());
}

double assignment_value(const CostMatrix& c, const std::vector<std::size_t>& perm) {
  double s = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) s += c(i, perm[i]);
  return s;
}

Assignment hungarian_max(const CostMatrix& c) {
  const std::size_t n = c.n();
  for (double v : c.entries().data())
    require(std::isfinite(v), "hungarian_max: cost matrix has non-finite entries");

  // 1-based arrays; index 0 is the virtual column used to start each search.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  auto cost = [&](std::size_t i, std::size_t j) { return -c(i - 1, j - 1); };

  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
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
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment a;
  a.perm.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) a.perm[match[j] - 1] = j - 1;
  a.objective = assignment_value(c, a.perm);
  return a;
}

Assignment brute_force_lap(const CostMatrix& c) {
  const std::size_t n = c.n();
  require(n <= 8, "brute_force_lap: n = " + std::to_string(n) + " exceeds the limit of 8");
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Assignment best{p, assignment_value(c, p)};
  while (std::next_permutation(p.begin(), p.end())) {
    const double val = assignment_value(c, p);
    if (val > best.objective) best = {p, val};
  }
  return best;
}

}  // namespace symcanon
