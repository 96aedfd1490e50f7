#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "symcanon/assignment.hpp"
#include "symcanon/checkpoint.hpp"
#include "symcanon/network.hpp"
#include "symcanon/symmetry.hpp"

namespace symcanon {

enum class AlignMode { PermOnly, PermSign };

std::string mode_name(AlignMode m);
AlignMode parse_mode(const std::string& name);

// <vec(a), vec(b)> over all weights and biases.
double inner_product(const Network& a, const Network& b);

// Cost matrix of hidden layer `layer` (1-based, 1 <= layer <= L-1):
//   C = W_l^A T_{l-1} (W_l^B)^T + (W_{l+1}^A)^T T_{l+1} W_{l+1}^B + b_l^A (b_l^B)^T
// with T_0 = T_L = I and the other T taken from `transforms`.
CostMatrix cost_matrix(const Network& a, const Network& b, const NetworkTransform& transforms,
                       std::size_t layer);

struct LayerSolution {
  LayerTransform transform;
  double objective = 0.0;  // <T, C>_F = sum_i scale[i] * C(i, perm[i])
};

// perm_only: argmax over permutations of <P, C>.
// perm_sign: perm from the assignment on |C|, then scale[i] = sign(C(i, perm[i]))
// with sign(0) = +1, which is optimal over all signed permutations.
LayerSolution solve_layer(const CostMatrix& c, AlignMode mode);

struct AlignmentResult {
  NetworkTransform transform;
  // <vec A, vec T(B)>: the initial value, then one entry per layer update.
  std::vector<double> objective_trace;
  std::size_t sweeps = 0;
  bool converged = false;
  std::uint64_t seed = 0;
};

struct CoordinateDescentOptions {
  std::size_t max_sweeps = 100;
  std::uint64_t seed = 0;
  // Called for every layer update with the layer index, its cost matrix and
  // the solver's proposal (before the acceptance test).
  std::function<void(std::size_t, const CostMatrix&, const LayerSolution&)> on_update;
};

// Randomised coordinate ascent over hidden layers. A proposal replaces the
// incumbent T_l only if it differs, strictly improves <T_l, C_l>, and does not
// lower the recomputed full objective, so the trace is exactly monotone and
// ties keep the incumbent. Converged means a full sweep changed nothing.
AlignmentResult coordinate_descent(const Network& a, const Network& b, AlignMode mode,
                                   const CoordinateDescentOptions& options);

// Returns (T(b), result); T(b) is functionally equal to b.
std::pair<Network, AlignmentResult> align(const Network& a, const Network& b, AlignMode mode,
                                          const CoordinateDescentOptions& options);

Json alignment_to_json(const AlignmentResult& r, AlignMode mode);

}  // namespace symcanon
