#pragma once

#include <cstddef>
#include <vector>

#include "symcanon/tensor.hpp"

namespace symcanon {

// Square matrix of finite scores; entry (i, j) is the value of assigning
// row i to column j.
class CostMatrix {
 public:
  explicit CostMatrix(Tensor entries);
  static CostMatrix zeros(std::size_t n) { return CostMatrix(Tensor::matrix(n, n)); }

  std::size_t n() const { return entries_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return entries_(i, j); }
  double& operator()(std::size_t i, std::size_t j) { return entries_(i, j); }
  const Tensor& entries() const { return entries_; }

 private:
  Tensor entries_;
};

struct Assignment {
  std::vector<std::size_t> perm;  // row i -> column perm[i]
  double objective = 0.0;         // sum_i c(i, perm[i]), summed in row order
};

double assignment_value(const CostMatrix& c, const std::vector<std::size_t>& perm);

// Maximum-weight perfect matching in O(n^3): shortest augmenting paths with
// row/column potentials on the negated matrix. Throws on non-finite entries.
Assignment hungarian_max(const CostMatrix& c);

// Exhaustive maximum over all n! permutations, n <= 8. Among tied optima the
// lexicographically smallest permutation wins.
Assignment brute_force_lap(const CostMatrix& c);

}  // namespace symcanon
