#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <numeric>

#include "support.hpp"
#include "symcanon/error.hpp"
#include "symcanon/rebasin.hpp"

using namespace symcanon;
using symcanon::testing::max_output_gap;
using symcanon::testing::median;
using symcanon::testing::random_tensor;

namespace {

// Max over all n! * 2^n signed permutations of sum_i q_i c(i, pi(i)).
double signed_perm_max(const CostMatrix& c) {
  const std::size_t n = c.n();
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  double best = -std::numeric_limits<double>::infinity();
  do {
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += ((mask >> i) & 1 ? -1.0 : 1.0) * c(i, p[i]);
      best = std::max(best, s);
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

Network scalar_net(double w1, double b1, double w2) {
  Network net;
  net.hidden = Activation::tanh();
  DenseLayer a(1, 1), b(1, 1);
  a.w(0, 0) = w1;
  a.bias[0] = b1;
  b.w(0, 0) = w2;
  net.layers = {a, b};
  return net;
}

// Dense (rows x cols) copy of a layer's weights.
Tensor weights(const DenseLayer& L) { return Tensor({L.out, L.in}, L.weight); }

Tensor mm(const Tensor& a, const Tensor& b) {
  Tensor c = Tensor::matrix(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

Tensor tr(const Tensor& a) {
  Tensor t = Tensor::matrix(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

double layer_objective(const CostMatrix& c, const LayerTransform& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.width(); ++i) s += t.scale[i] * c(i, t.perm[i]);
  return s;
}

}  // namespace

TEST(CostMatrix, ScalarExample) {
  const Network net = scalar_net(2.0, 1.0, 3.0);
  const auto id = NetworkTransform::identity(net.arch(), ScaleDomain::SignFlip);
  EXPECT_EQ(cost_matrix(net, net, id, 1)(0, 0), 14.0);
}

TEST(CostMatrix, NegatedPeerFlipsSign) {
  const Network a = scalar_net(2.0, 1.0, 3.0);
  const Network b = scalar_net(-2.0, -1.0, -3.0);
  const auto id = NetworkTransform::identity(a.arch(), ScaleDomain::SignFlip);
  EXPECT_EQ(cost_matrix(a, b, id, 1)(0, 0), -14.0);
}

TEST(CostMatrix, MatchesDenseMatrixProducts) {
  const Arch arch = parse_arch("2-3-3-3-1");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Network a = init_mlp(arch, Activation::tanh(), seed);
    const Network b = init_mlp(arch, Activation::tanh(), seed + 100);
    const auto t = sample_transform(arch, ScaleDomain::SignFlip, true, true, seed + 200);
    for (std::size_t l = 1; l <= 3; ++l) {
      const Tensor prev_m =
          l >= 2 ? t.layers[l - 2].matrix() : LayerTransform::identity(2).matrix();
      const Tensor next_m = l + 1 < 4 ? t.layers[l].matrix() : LayerTransform::identity(1).matrix();
      const Tensor wa = weights(a.layers[l - 1]), wb = weights(b.layers[l - 1]);
      const Tensor va = weights(a.layers[l]), vb = weights(b.layers[l]);
      Tensor want = mm(mm(wa, prev_m), tr(wb));
      const Tensor second = mm(mm(tr(va), next_m), vb);
      for (std::size_t i = 0; i < want.size(); ++i) want[i] += second[i];
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) want(i, j) += a.layers[l - 1].bias[i] * b.layers[l - 1].bias[j];
      const CostMatrix got = cost_matrix(a, b, t, l);
      for (std::size_t i = 0; i < want.size(); ++i)
        EXPECT_NEAR(got.entries()[i], want[i], 1e-12);
    }
  }
}

TEST(CostMatrix, RejectsBadLayerAndArchMismatch) {
  const Network a = init_mlp(parse_arch("2-3-1"), Activation::tanh(), 1);
  const Network b = init_mlp(parse_arch("2-4-1"), Activation::tanh(), 1);
  const auto id = NetworkTransform::identity(a.arch(), ScaleDomain::SignFlip);
  EXPECT_THROW(cost_matrix(a, a, id, 0), Error);
  EXPECT_THROW(cost_matrix(a, a, id, 2), Error);
  EXPECT_THROW(cost_matrix(a, b, id, 1), Error);
}

TEST(SolveLayer, SingleNegativeEntry) {
  CostMatrix c = CostMatrix::zeros(1);
  c(0, 0) = -5.0;
  const LayerSolution s = solve_layer(c, AlignMode::PermSign);
  EXPECT_EQ(s.transform.scale, (std::vector<double>{-1.0}));
  EXPECT_EQ(s.objective, 5.0);
}

TEST(SolveLayer, TwoByTwoSignedSwap) {
  const CostMatrix c(Tensor::from_rows({{1, -3}, {2, 0.5}}));
  const LayerSolution s = solve_layer(c, AlignMode::PermSign);
  EXPECT_EQ(s.transform.perm, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(s.transform.scale, (std::vector<double>{-1.0, 1.0}));
  EXPECT_EQ(s.objective, 5.0);
  EXPECT_EQ(signed_perm_max(c), 5.0);
}

TEST(SolveLayer, ZeroEntryKeepsPositiveSign) {
  const LayerSolution s = solve_layer(CostMatrix::zeros(2), AlignMode::PermSign);
  EXPECT_EQ(s.transform.scale, (std::vector<double>{1.0, 1.0}));
}

TEST(SolveLayer, MatchesSignedPermutationBruteForce) {
  Pcg32 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const CostMatrix c(random_tensor(rng, 4, 4));
    const LayerSolution s = solve_layer(c, AlignMode::PermSign);
    EXPECT_NEAR(s.objective, signed_perm_max(c), 1e-12) << "trial " << trial;
    EXPECT_NEAR(s.objective, layer_objective(c, s.transform), 1e-12);
  }
}

TEST(SolveLayer, SmallSizesMatchBruteForce) {
  Pcg32 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(4);
    const CostMatrix c(random_tensor(rng, n, n));
    EXPECT_NEAR(solve_layer(c, AlignMode::PermSign).objective, signed_perm_max(c), 1e-12);
  }
}

TEST(SolveLayer, SignedDominatesPermOnly) {
  Pcg32 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const CostMatrix c(random_tensor(rng, 5, 5));
    const LayerSolution ps = solve_layer(c, AlignMode::PermSign);
    const LayerSolution po = solve_layer(c, AlignMode::PermOnly);
    EXPECT_GE(ps.objective, po.objective);
    EXPECT_EQ(po.transform.scale, std::vector<double>(5, 1.0));
  }
}

TEST(CoordinateDescent, SelfAlignmentIsFlat) {
  const Network a = init_siren(parse_arch("2-8-8-1"), 30.0, 3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const AlignmentResult r = coordinate_descent(a, a, AlignMode::PermOnly, {.seed = seed});
    const double self = inner_product(a, a);
    for (double v : r.objective_trace) EXPECT_EQ(v, self);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.sweeps, 2u);
    EXPECT_EQ(r.transform, NetworkTransform::identity(a.arch(), ScaleDomain::Identity));
  }
}

TEST(CoordinateDescent, RecoversSignedPermutationOneHiddenLayer) {
  const Arch arch = parse_arch("2-16-1");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Network a = init_siren(arch, 30.0, seed);
    const auto g = sample_transform(arch, ScaleDomain::SignFlip, true, true, seed + 50);
    const Network b = apply(g, a);
    const auto [aligned, r] = align(a, b, AlignMode::PermSign, {.seed = seed});
    const auto fa = flatten(a), fb = flatten(aligned);
    for (std::size_t i = 0; i < fa.size(); ++i) EXPECT_NEAR(fb[i], fa[i], 1e-9) << "seed " << seed;
    EXPECT_TRUE(r.converged);
  }
}

TEST(CoordinateDescent, TraceIsMonotone) {
  const Arch arch = parse_arch("2-12-12-12-1");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Network a = init_siren(arch, 30.0, seed);
    const Network b = init_siren(arch, 30.0, seed + 1000);
    for (AlignMode m : {AlignMode::PermOnly, AlignMode::PermSign}) {
      const AlignmentResult r = coordinate_descent(a, b, m, {.seed = seed});
      EXPECT_EQ(r.objective_trace.front(), inner_product(a, b));
      for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
        EXPECT_GE(r.objective_trace[i], r.objective_trace[i - 1]);
      EXPECT_NEAR(r.objective_trace.back(), inner_product(a, apply(r.transform, b)), 1e-9);
    }
  }
}

TEST(CoordinateDescent, EveryProposalIsLayerOptimal) {
  const Arch arch = parse_arch("2-4-4-1");
  const Network a = init_mlp(arch, Activation::tanh(), 1);
  const Network b = init_mlp(arch, Activation::tanh(), 2);
  std::size_t calls = 0;
  CoordinateDescentOptions opts;
  opts.on_update = [&](std::size_t, const CostMatrix& c, const LayerSolution& s) {
    ++calls;
    EXPECT_NEAR(s.objective, signed_perm_max(c), 1e-12);
    EXPECT_GE(s.objective, solve_layer(c, AlignMode::PermOnly).objective);
  };
  const AlignmentResult r = coordinate_descent(a, b, AlignMode::PermSign, opts);
  EXPECT_EQ(calls, r.objective_trace.size() - 1);
}

TEST(CoordinateDescent, SweepCapReportsNotConverged) {
  const Arch arch = parse_arch("2-12-12-12-1");
  const Network a = init_siren(arch, 30.0, 1);
  const Network b = init_siren(arch, 30.0, 2);
  const AlignmentResult r = coordinate_descent(a, b, AlignMode::PermSign, {.max_sweeps = 1});
  EXPECT_EQ(r.sweeps, 1u);
  EXPECT_FALSE(r.converged);
}

TEST(CoordinateDescent, DeterministicPerSeed) {
  const Arch arch = parse_arch("2-10-10-10-1");
  const Network a = init_siren(arch, 30.0, 4);
  const Network b = init_siren(arch, 30.0, 5);
  const auto r1 = coordinate_descent(a, b, AlignMode::PermSign, {.seed = 9});
  const auto r2 = coordinate_descent(a, b, AlignMode::PermSign, {.seed = 9});
  EXPECT_EQ(r1.transform, r2.transform);
  EXPECT_EQ(r1.objective_trace, r2.objective_trace);
}

TEST(CoordinateDescent, RejectsSignModeForRelu) {
  const Network a = init_mlp(parse_arch("2-4-1"), Activation::relu(), 1);
  EXPECT_THROW(coordinate_descent(a, a, AlignMode::PermSign, {}), Error);
  EXPECT_NO_THROW(coordinate_descent(a, a, AlignMode::PermOnly, {}));
}

TEST(CoordinateDescent, RejectsMismatchedArchitectures) {
  const Network a = init_siren(parse_arch("2-4-1"), 30.0, 1);
  const Network b = init_siren(parse_arch("2-5-1"), 30.0, 1);
  EXPECT_THROW(coordinate_descent(a, b, AlignMode::PermOnly, {}), Error);
}

TEST(Align, PreservesFunctionAndImprovesInnerProduct) {
  const Arch arch = parse_arch("2-16-16-1");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Network a = init_siren(arch, 30.0, seed);
    const Network b = init_siren(arch, 30.0, seed + 77);
    for (AlignMode m : {AlignMode::PermOnly, AlignMode::PermSign}) {
      const auto [aligned, r] = align(a, b, m, {.seed = seed});
      EXPECT_LE(max_output_gap(b, aligned, 256, seed), 1e-6);
      EXPECT_GE(inner_product(a, aligned), inner_product(a, b));
    }
  }
}

TEST(Align, PermOnlyOrbitUnderSignModeMayFlip) {
  const Arch arch = parse_arch("2-8-8-1");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Network a = init_siren(arch, 30.0, seed);
    const Network b = apply(sample_transform(arch, ScaleDomain::SignFlip, true, false, seed), a);
    const auto [s_net, s] = align(a, b, AlignMode::PermSign, {.seed = seed});
    const auto [p_net, p] = align(a, b, AlignMode::PermOnly, {.seed = seed});
    EXPECT_GE(s.objective_trace.back(), p.objective_trace.back() - 1e-9);
    EXPECT_LE(max_output_gap(a, s_net, 256, seed), 1e-6);
  }
}

TEST(Align, SignedMedianDominatesOverSeeds) {
  const Arch arch = parse_arch("2-16-16-16-1");
  std::vector<double> gap;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Network a = init_siren(arch, 30.0, seed);
    const Network b = init_siren(arch, 30.0, seed + 500);
    const auto s = coordinate_descent(a, b, AlignMode::PermSign, {.seed = seed});
    const auto p = coordinate_descent(a, b, AlignMode::PermOnly, {.seed = seed});
    gap.push_back(s.objective_trace.back() - p.objective_trace.back());
  }
  EXPECT_GE(median(gap), 0.0);
}

TEST(AlignmentJson, Layout) {
  const Network a = init_siren(parse_arch("2-4-4-1"), 30.0, 1);
  const Network b = init_siren(parse_arch("2-4-4-1"), 30.0, 2);
  const auto r = coordinate_descent(a, b, AlignMode::PermSign, {.seed = 3});
  const Json j = alignment_to_json(r, AlignMode::PermSign);
  EXPECT_EQ(j.at("mode"), "perm_sign");
  EXPECT_EQ(j.at("objective_trace").size(), r.objective_trace.size());
  EXPECT_EQ(transform_from_json(j.at("transform")), r.transform);
  EXPECT_EQ(j.at("seed"), 3);
}

TEST(AlignMode, ParseRoundTrip) {
  for (AlignMode m : {AlignMode::PermOnly, AlignMode::PermSign})
    EXPECT_EQ(parse_mode(mode_name(m)), m);
  EXPECT_THROW(parse_mode("perm_scale"), Error);
}
