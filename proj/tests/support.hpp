#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "symcanon/network.hpp"
#include "symcanon/rng.hpp"
#include "symcanon/tape.hpp"

namespace symcanon::testing {

inline Tensor random_tensor(Pcg32& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Tensor t = Tensor::matrix(rows, cols);
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

// Per-neuron scalar loop, independent of the library's forward().
inline std::vector<double> oracle_forward(const Network& net, const std::vector<double>& x) {
  std::vector<double> h = x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const DenseLayer& L = net.layers[l];
    std::vector<double> next(L.out);
    for (std::size_t i = 0; i < L.out; ++i) {
      double s = L.bias[i];
      for (std::size_t j = 0; j < L.in; ++j) s += L.weight[i * L.in + j] * h[j];
      if (l + 1 < net.layers.size()) {
        switch (net.hidden.kind) {
          case ActKind::Sine: s = std::sin(net.hidden.omega * s); break;
          case ActKind::Tanh: s = std::tanh(s); break;
          case ActKind::Relu: s = s > 0.0 ? s : 0.0; break;
          case ActKind::Identity: break;
        }
      }
      next[i] = s;
    }
    h = std::move(next);
  }
  return h;
}

inline double rel_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Max |f(x) - f(g x)| over a probe batch.
inline double max_output_gap(const Network& a, const Network& b, std::size_t n_probe,
                             std::uint64_t seed) {
  Pcg32 rng(seed);
  const Tensor x = random_tensor(rng, n_probe, a.input_dim());
  const Tensor ya = forward(a, x);
  const Tensor yb = forward(b, x);
  return max_abs_diff(ya, yb);
}

// Central-difference check of every leaf that requires grad. Returns the
// worst ||g_fd - g_ad|| / max(||g_fd||, ||g_ad||) over leaves.
inline double gradient_check(Tape& tape, Var loss, const std::vector<Var>& leaves,
                             double h = 1e-5) {
  tape.backward(loss);
  double worst = 0.0;
  for (Var leaf : leaves) {
    const Tensor analytic = tape.grad(leaf);
    Tensor base = tape.value(leaf);
    std::vector<double> fd(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      Tensor p = base, m = base;
      p[i] += h;
      m[i] -= h;
      tape.set_leaf(leaf, p);
      tape.forward();
      const double fp = tape.value(loss).item();
      tape.set_leaf(leaf, m);
      tape.forward();
      const double fm = tape.value(loss).item();
      fd[i] = (fp - fm) / (2.0 * h);
    }
    tape.set_leaf(leaf, base);
    tape.forward();
    double num = 0.0, na = 0.0, nf = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
      num += (fd[i] - analytic[i]) * (fd[i] - analytic[i]);
      na += analytic[i] * analytic[i];
      nf += fd[i] * fd[i];
    }
    const double den = std::max(std::sqrt(std::max(na, nf)), 1e-12);
    worst = std::max(worst, std::sqrt(num) / den);
  }
  return worst;
}

// A random small graph over two or three leaves, mixing every differentiable
// op kind; the result is a scalar loss node, last on the tape.
struct RandomGraph {
  Tape tape;
  std::vector<Var> leaves;
  Var loss;
};

inline RandomGraph random_graph(std::uint64_t seed) {
  Pcg32 rng(seed);
  RandomGraph g;
  Tape& t = g.tape;
  const std::size_t n = 2 + rng.below(3), k = 2 + rng.below(3), m = 2 + rng.below(3);
  Var x = t.leaf(random_tensor(rng, n, k));
  Var w = t.leaf(random_tensor(rng, k, m, 0.7));
  Var b = t.leaf(random_tensor(rng, 1, m, 0.5));
  g.leaves = {x, w, b};
  Var h = t.add(t.matmul(x, w), b);
  const std::size_t depth = 2 + rng.below(4);
  for (std::size_t d = 0; d < depth; ++d) {
    switch (rng.below(15)) {
      case 0: h = t.sin(h); break;
      case 1: h = t.tanh(h); break;
      case 2: h = t.silu(h); break;
      case 3: h = t.exp(t.scale(h, 0.3)); break;
      case 4: h = t.log(t.add(t.mul(h, h), t.constant(Tensor::scalar(1.0)))); break;
      case 5: h = t.mul(h, t.tanh(h)); break;
      case 6: h = t.softmax_rows(h); break;
      case 7: h = t.log_softmax_rows(h); break;
      case 8: h = t.row_normalize(t.add(h, t.constant(Tensor::scalar(0.1)))); break;
      case 9: {
        const Tensor& v = t.value(h);
        Var u = t.leaf(random_tensor(rng, v.cols(), v.cols(), 0.5));
        g.leaves.push_back(u);
        h = t.matmul_nt(h, u);
        break;
      }
      case 10: {
        const Var parts[] = {h, t.sin(h)};
        h = t.concat_cols(parts);
        break;
      }
      case 11: {
        const std::size_t rows = t.value(h).rows();
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < rows + 2; ++i) idx.push_back(rng.below(rows));
        h = t.scatter_add_rows(t.gather_rows(h, idx), idx, rows);
        break;
      }
      case 12: h = t.sub(t.sum_rows(h), t.scale(t.sum_rows(t.sin(h)), 0.5)); break;
      case 13: {
        const Tensor& v = t.value(h);
        h = t.view(h, 0, {v.size()});
        h = t.mul(h, h);
        break;
      }
      default: {
        // Relu away from its kink: shift so no entry sits near zero.
        const Tensor& v = t.value(h);
        double shift = 0.0;
        for (double e : v.data())
          if (std::abs(e) < 1e-3) shift = 0.01;
        h = t.relu(t.add(h, t.constant(Tensor::scalar(shift))));
        h = t.add(h, t.scale(t.tanh(h), 0.1));
        break;
      }
    }
  }
  switch (rng.below(3)) {
    case 0: {
      // Weighted, since a plain sum of a softmax is constant.
      const Tensor& v = t.value(h);
      Tensor c = v;
      for (auto& e : c.data()) e = rng.normal();
      g.loss = t.sum(t.mul(h, t.constant(c)));
      break;
    }
    case 1: g.loss = t.mean(t.mul(h, h)); break;
    default: g.loss = t.l2_norm(h); break;
  }
  return g;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("symcanon_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace symcanon::testing
