#include "symcanon/rebasin.hpp"

#include <cmath>

#include "symcanon/error.hpp"
#include "symcanon/rng.hpp"

namespace symcanon {

std::string mode_name(AlignMode m) { return m == AlignMode::PermOnly ? "perm_only" : "perm_sign"; }

AlignMode parse_mode(const std::string& name) {
  if (name == "perm_only") return AlignMode::PermOnly;
  if (name == "perm_sign") return AlignMode::PermSign;
  throw Error("unknown alignment mode '" + name + "' (expected perm_only or perm_sign)");
}

double inner_product(const Network& a, const Network& b) {
  require(a.arch() == b.arch(), "inner_product: architectures differ");
  double s = 0.0;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& A = a.layers[l];
    const auto& B = b.layers[l];
    for (std::size_t i = 0; i < A.weight.size(); ++i) s += A.weight[i] * B.weight[i];
    for (std::size_t i = 0; i < A.bias.size(); ++i) s += A.bias[i] * B.bias[i];
  }
  return s;
}

CostMatrix cost_matrix(const Network& a, const Network& b, const NetworkTransform& transforms,
                       std::size_t layer) {
  require(a.arch() == b.arch(), "cost_matrix: architectures differ (" + a.arch().str() + " vs " +
                                    b.arch().str() + ")");
  const std::size_t L = a.layers.size();
  require(layer >= 1 && layer + 1 <= L, "cost_matrix: layer " + std::to_string(layer) +
                                            " is not a hidden layer of " + a.arch().str());
  validate(transforms, a.arch());

  const DenseLayer& wa = a.layers[layer - 1];
  const DenseLayer& wb = b.layers[layer - 1];
  const DenseLayer& va = a.layers[layer];
  const DenseLayer& vb = b.layers[layer];
  const LayerTransform* prev = layer >= 2 ? &transforms.layers[layer - 2] : nullptr;
  const LayerTransform* next = layer + 1 < L ? &transforms.layers[layer] : nullptr;

  const std::size_t n = wa.out;
  CostMatrix c = CostMatrix::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < wa.in; ++k) {
        const std::size_t pk = prev ? prev->perm[k] : k;
        const double qk = prev ? prev->scale[k] : 1.0;
        s += wa.w(i, k) * qk * wb.w(j, pk);
      }
      for (std::size_t r = 0; r < va.out; ++r) {
        const std::size_t pr = next ? next->perm[r] : r;
        const double qr = next ? next->scale[r] : 1.0;
        s += va.w(r, i) * qr * vb.w(pr, j);
      }
      s += wa.bias[i] * wb.bias[j];
      c(i, j) = s;
    }
  }
  return c;
}

LayerSolution solve_layer(const CostMatrix& c, AlignMode mode) {
  LayerSolution sol;
  const std::size_t n = c.n();
  if (mode == AlignMode::PermOnly) {
    Assignment a = hungarian_max(c);
    sol.transform.perm = a.perm;
    sol.transform.scale.assign(n, 1.0);
    sol.objective = a.objective;
    return sol;
  }
  Tensor abs_c = c.entries();
  for (auto& v : abs_c.data()) v = std::abs(v);
  Assignment a = hungarian_max(CostMatrix(std::move(abs_c)));
  sol.transform.perm = a.perm;
  sol.transform.scale.resize(n);
  double obj = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double cij = c(i, a.perm[i]);
    sol.transform.scale[i] = cij < 0.0 ? -1.0 : 1.0;
    obj += sol.transform.scale[i] * cij;
  }
  sol.objective = obj;
  return sol;
}

namespace {

double layer_value(const CostMatrix& c, const LayerTransform& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.width(); ++i) s += t.scale[i] * c(i, t.perm[i]);
  return s;
}

}  // namespace

AlignmentResult coordinate_descent(const Network& a, const Network& b, AlignMode mode,
                                   const CoordinateDescentOptions& options) {
  validate(a);
  validate(b);
  require(a.arch() == b.arch(), "align: architectures differ (" + a.arch().str() + " vs " +
                                    b.arch().str() + ")");
  require(a.hidden == b.hidden, "align: networks use different activations");
  const ScaleDomain domain = mode == AlignMode::PermSign ? ScaleDomain::SignFlip
                                                         : ScaleDomain::Identity;
  check_domain(domain, a.hidden);

  AlignmentResult res;
  res.seed = options.seed;
  res.transform = NetworkTransform::identity(a.arch(), domain);
  double current = inner_product(a, b);
  res.objective_trace.push_back(current);

  const std::size_t hidden = a.layers.size() - 1;
  if (hidden == 0) {
    res.converged = true;
    return res;
  }

  Pcg32 rng(options.seed);
  for (std::size_t sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    bool changed = false;
    for (std::size_t idx : rng.permutation(hidden)) {
      const std::size_t layer = idx + 1;
      CostMatrix c = cost_matrix(a, b, res.transform, layer);
      LayerSolution sol = solve_layer(c, mode);
      if (options.on_update) options.on_update(layer, c, sol);
      LayerTransform& incumbent = res.transform.layers[idx];
      if (!(sol.transform == incumbent) && sol.objective > layer_value(c, incumbent)) {
        NetworkTransform candidate = res.transform;
        candidate.layers[idx] = sol.transform;
        const double value = inner_product(a, apply(candidate, b));
        if (value >= current) {
          res.transform = std::move(candidate);
          current = value;
          changed = true;
        }
      }
      res.objective_trace.push_back(current);
    }
    res.sweeps = sweep;
    if (!changed) {
      res.converged = true;
      break;
    }
  }
  return res;
}

std::pair<Network, AlignmentResult> align(const Network& a, const Network& b, AlignMode mode,
                                          const CoordinateDescentOptions& options) {
  AlignmentResult r = coordinate_descent(a, b, mode, options);
  Network aligned = apply(r.transform, b);
  return {std::move(aligned), std::move(r)};
}

Json alignment_to_json(const AlignmentResult& r, AlignMode mode) {
  return {{"mode", mode_name(mode)},
          {"transform", transform_to_json(r.transform)},
          {"objective_trace", r.objective_trace},
          {"sweeps", r.sweeps},
          {"converged", r.converged},
          {"seed", r.seed}};
}

}  // namespace symcanon
