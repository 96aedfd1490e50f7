#include "symcanon/metagraph.hpp"

#include <cmath>

#include "symcanon/error.hpp"
#include "symcanon/rng.hpp"

namespace symcanon {

std::size_t NetGraph::node_id(std::size_t layer, std::size_t position) const {
  return layer_offsets.at(layer) + position;
}

NetGraph to_graph(const Network& net) {
  validate(net);
  NetGraph g;
  g.depth = net.layers.size();
  const Arch arch = net.arch();
  for (std::size_t l = 0; l < arch.widths.size(); ++l) {
    g.layer_offsets.push_back(g.nodes.size());
    const NodeKind kind = l == 0 ? NodeKind::Input : l == g.depth ? NodeKind::Output
                                                                  : NodeKind::Hidden;
    for (std::size_t p = 0; p < arch.widths[l]; ++p) {
      const double bias = l == 0 ? 0.0 : net.layers[l - 1].bias[p];
      g.nodes.push_back({l, p, bias, kind});
    }
  }
  for (std::size_t l = 1; l <= g.depth; ++l) {
    const DenseLayer& L = net.layers[l - 1];
    for (std::size_t i = 0; i < L.out; ++i)
      for (std::size_t j = 0; j < L.in; ++j)
        g.edges.push_back({g.node_id(l - 1, j), g.node_id(l, i), L.w(i, j)});
  }
  return g;
}

std::string variant_name(GmnVariant v) {
  switch (v) {
    case GmnVariant::Plain: return "plain";
    case GmnVariant::ScaleSign: return "scale_sign";
    case GmnVariant::ScalePositive: return "scale_positive";
  }
  return "?";
}

GmnVariant parse_variant(const std::string& name) {
  if (name == "plain") return GmnVariant::Plain;
  if (name == "scale_sign") return GmnVariant::ScaleSign;
  if (name == "scale_positive") return GmnVariant::ScalePositive;
  throw Error("unknown encoder variant '" + name + "' (expected plain, scale_sign, scale_positive)");
}

std::string readout_name(ReadoutMode r) { return r == ReadoutMode::FullGraph ? "full" : "last_layer"; }

ReadoutMode parse_readout(const std::string& name) {
  if (name == "full") return ReadoutMode::FullGraph;
  if (name == "last_layer") return ReadoutMode::LastLayer;
  throw Error("unknown readout '" + name + "' (expected full or last_layer)");
}

void check_variant(GmnVariant v, const Activation& act) {
  if (v == GmnVariant::ScaleSign)
    require(act.kind == ActKind::Sine || act.kind == ActKind::Tanh,
            "scale_sign encoder requires a sine or tanh network, got " + act.name());
  if (v == GmnVariant::ScalePositive)
    require(act.kind == ActKind::Relu, "scale_positive encoder requires a relu network, got " +
                                           act.name());
}

// ---------------------------------------------------------------------------
// Parameter construction.

namespace {

struct Builder {
  ParamSet& ps;
  Pcg32 rng;

  void matrix(const std::string& name, std::size_t in, std::size_t out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor t = Tensor::matrix(in, out);
    for (auto& v : t.data()) v = rng.uniform(-bound, bound);
    ps.add(name, std::move(t));
  }
  void linear(const std::string& name, std::size_t in, std::size_t out) {
    matrix(name + ".w", in, out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor b = Tensor::matrix(1, out);
    for (auto& v : b.data()) v = rng.uniform(-bound, bound);
    ps.add(name + ".b", std::move(b));
  }
  void mlp(const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out) {
    linear(prefix + ".l0", in, hidden);
    linear(prefix + ".l1", hidden, out);
  }
  // Equivariant linear map with variance 1 / (fan * in), so a sum of `fan`
  // such maps keeps the input's scale.
  void gamma(const std::string& name, std::size_t in, std::size_t out, std::size_t fan = 1) {
    const double bound = std::sqrt(3.0 / static_cast<double>(fan * in));
    Tensor t = Tensor::matrix(in, out);
    for (auto& v : t.data()) v = rng.uniform(-bound, bound);
    ps.add(name, std::move(t));
  }
  // Parameters of gate(): the output bias starts at 0, so the gate starts near 1.
  void gate(const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out) {
    mlp(prefix, in, hidden, out);
    ps.at(prefix + ".l1.b") = Tensor::matrix(1, out);
  }
};

std::string it(std::size_t t) { return "iter" + std::to_string(t); }

}  // namespace

GmnParams init_gmn(const GmnConfig& config, std::uint64_t seed) {
  require(config.hidden_dim >= 1 && config.latent_dim >= 1, "gmn: dimensions must be >= 1");
  require(config.n_iterations >= 1, "gmn: n_iterations must be >= 1");
  require(config.max_depth >= 1, "gmn: max_depth must be >= 1");
  GmnParams gp;
  gp.config = config;
  Builder b{gp.params, Pcg32(seed)};
  const std::size_t d = config.hidden_dim;
  const std::size_t F = config.max_depth + 1;
  const std::size_t T = config.n_iterations;

  if (config.variant == GmnVariant::Plain) {
    b.linear("init.v", 1 + F, d);
    b.linear("init.e", 1, d);
    for (std::size_t t = 0; t < T; ++t) {
      b.mlp(it(t) + ".msg", 3 * d, d, d);
      b.mlp(it(t) + ".upd", 2 * d, d, d);
      if (t + 1 < T) b.mlp(it(t) + ".edge", 3 * d, d, d);
    }
    b.mlp("readout.mlp", d, d, config.latent_dim);
    return gp;
  }

  const bool sign = config.variant == GmnVariant::ScaleSign;
  const std::size_t c1 = sign ? d : 1;  // canon width of the scalar bias
  const std::size_t c = d;              // canon width of a d-dim state
  b.gamma("init.v.gamma", 1, d);
  if (sign) b.mlp("init.v.canon", 1, d, d);
  b.gate("init.v.rho", c1 + F, d, d);
  b.linear("init.fixed", F, d);
  b.gamma("init.e.gamma", 1, d);
  for (std::size_t t = 0; t < T; ++t) {
    const std::string p = it(t);
    if (sign) {
      b.mlp(p + ".canon.h", d, d, d);
      b.mlp(p + ".canon.r", d, d, d);
      b.mlp(p + ".canon.m", d, d, d);
    }
    b.gamma(p + ".msg.gy", d, d);
    b.gamma(p + ".msg.ge", d, d);
    b.gamma(p + ".msg.g0", d, d, 2);
    b.gamma(p + ".msg.g1", d, d, 2);
    b.gate(p + ".msg.rho", 2 * c, d, d);
    b.gamma(p + ".upd.g0", d, d, 2);
    b.gamma(p + ".upd.g1", d, d, 2);
    b.gate(p + ".upd.rho", 2 * c, d, d);
    if (t + 1 < T) {
      if (sign) b.mlp(p + ".canon.e", d, d, d);
      b.gamma(p + ".edge.g", d, d);
      b.gate(p + ".edge.rho", 3 * c, d, d);
    }
  }
  if (sign) b.mlp("readout.canon", d, d, d);
  b.mlp("readout.mlp", c, d, config.latent_dim);
  return gp;
}

// ---------------------------------------------------------------------------
// Blocks.

Var mlp(Tape& tape, const BoundParams& p, const std::string& prefix, Var x) {
  Var h = tape.add(tape.matmul(x, p[prefix + ".l0.w"]), p[prefix + ".l0.b"]);
  h = tape.silu(h);
  return tape.add(tape.matmul(h, p[prefix + ".l1.w"]), p[prefix + ".l1.b"]);
}

Var gate(Tape& tape, const BoundParams& p, const std::string& prefix, Var x) {
  return tape.add(tape.tanh(mlp(tape, p, prefix, x)), tape.constant(Tensor::scalar(1.0)));
}

Var canon_sign(Tape& tape, const BoundParams& p, const std::string& prefix, Var x) {
  return tape.add(mlp(tape, p, prefix, x), mlp(tape, p, prefix, tape.neg(x)));
}

Var canon_pos(Tape& tape, Var x) { return tape.row_normalize(x); }

Var canon(Tape& tape, GmnVariant v, const BoundParams& p, const std::string& prefix, Var x) {
  switch (v) {
    case GmnVariant::ScaleSign: return canon_sign(tape, p, prefix, x);
    case GmnVariant::ScalePositive: return canon_pos(tape, x);
    case GmnVariant::Plain: break;
  }
  throw Error("canon: the plain variant has no canonicalisation");
}

Var rescale_eq(Tape& tape, Var y, Var e, Var gamma_y, Var gamma_e) {
  return tape.mul(tape.matmul(y, gamma_y), tape.matmul(e, gamma_e));
}

Var scale_eq(Tape& tape, std::span<const Var> xs, std::span<const Var> gammas,
             const BoundParams& p, const std::string& rho_prefix, Var invariants) {
  require(!xs.empty() && xs.size() == gammas.size(), "scale_eq: need one gamma per input");
  Var lin = tape.matmul(xs[0], gammas[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) lin = tape.add(lin, tape.matmul(xs[i], gammas[i]));
  return tape.mul(lin, gate(tape, p, rho_prefix, invariants));
}

Var scale_eq(Tape& tape, GmnVariant v, std::span<const Var> xs, std::span<const Var> gammas,
             const BoundParams& p, const std::string& rho_prefix,
             std::span<const std::string> canon_prefixes) {
  require(canon_prefixes.size() == xs.size() || v == GmnVariant::ScalePositive,
          "scale_eq: need one canon prefix per input");
  std::vector<Var> inv;
  for (std::size_t i = 0; i < xs.size(); ++i)
    inv.push_back(canon(tape, v, p, v == GmnVariant::ScaleSign ? canon_prefixes[i] : "", xs[i]));
  return scale_eq(tape, xs, gammas, p, rho_prefix, tape.concat_cols(inv));
}

namespace {

Var msg_se_impl(Tape& tape, GmnVariant v, const BoundParams& p, const std::string& pre, Var x,
                Var canon_x, Var y, Var e) {
  Var r = rescale_eq(tape, y, e, p[pre + ".msg.gy"], p[pre + ".msg.ge"]);
  const Var parts[] = {canon_x, canon(tape, v, p, pre + ".canon.r", r)};
  const Var xs[] = {x, r};
  const Var gs[] = {p[pre + ".msg.g0"], p[pre + ".msg.g1"]};
  return scale_eq(tape, xs, gs, p, pre + ".msg.rho", tape.concat_cols(parts));
}

Var upd_se_impl(Tape& tape, GmnVariant v, const BoundParams& p, const std::string& pre, Var x,
                Var canon_x, Var m) {
  const Var parts[] = {canon_x, canon(tape, v, p, pre + ".canon.m", m)};
  const Var xs[] = {x, m};
  const Var gs[] = {p[pre + ".upd.g0"], p[pre + ".upd.g1"]};
  return scale_eq(tape, xs, gs, p, pre + ".upd.rho", tape.concat_cols(parts));
}

Tensor onehot_layers(const NetGraph& g, std::size_t F) {
  Tensor t = Tensor::matrix(g.nodes.size(), F);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) t(i, g.nodes[i].layer) = 1.0;
  return t;
}

// Divides biases and weights by their per-layer RMS. The statistic is
// invariant under permutations and sign flips but not under positive scales,
// so scale_positive skips it (its canon is magnitude-free anyway).
void normalize_per_layer(const NetGraph& g, Tensor& bias, Tensor& w) {
  std::vector<double> wss(g.depth + 1, 0.0), bss(g.depth + 1, 0.0);
  std::vector<std::size_t> wn(g.depth + 1, 0), bn(g.depth + 1, 0);
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const std::size_t l = g.nodes[g.edges[k].dst].layer;
    wss[l] += w(k, 0) * w(k, 0);
    ++wn[l];
  }
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const std::size_t l = g.nodes[i].layer;
    bss[l] += bias(i, 0) * bias(i, 0);
    ++bn[l];
  }
  auto inv_rms = [](double ss, std::size_t n) {
    return ss > 0.0 ? 1.0 / std::sqrt(ss / static_cast<double>(n)) : 1.0;
  };
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const std::size_t l = g.nodes[g.edges[k].dst].layer;
    w(k, 0) *= inv_rms(wss[l], wn[l]);
  }
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const std::size_t l = g.nodes[i].layer;
    bias(i, 0) *= inv_rms(bss[l], bn[l]);
  }
}

}  // namespace

Var msg_se(Tape& tape, GmnVariant v, const BoundParams& p, std::size_t t, Var x, Var y, Var e) {
  const std::string pre = it(t);
  return msg_se_impl(tape, v, p, pre, x, canon(tape, v, p, pre + ".canon.h", x), y, e);
}

Var upd_se(Tape& tape, GmnVariant v, const BoundParams& p, std::size_t t, Var x, Var m) {
  const std::string pre = it(t);
  return upd_se_impl(tape, v, p, pre, x, canon(tape, v, p, pre + ".canon.h", x), m);
}

// ---------------------------------------------------------------------------
// Encoder.

Var encode_on_tape(Tape& tape, const BoundParams& p, const GmnConfig& config, const NetGraph& g) {
  require(g.depth <= config.max_depth, "encoder: network depth " + std::to_string(g.depth) +
                                            " exceeds max_depth " +
                                            std::to_string(config.max_depth));
  const GmnVariant v = config.variant;
  const std::size_t N = g.nodes.size();
  const std::size_t M = g.edges.size();
  const std::size_t F = config.max_depth + 1;
  const std::size_t T = config.n_iterations;

  std::vector<std::size_t> src(M), dst(M);
  Tensor w = Tensor::matrix(M, 1);
  for (std::size_t k = 0; k < M; ++k) {
    src[k] = g.edges[k].src;
    dst[k] = g.edges[k].dst;
    w(k, 0) = g.edges[k].weight;
  }
  Tensor bias = Tensor::matrix(N, 1);
  for (std::size_t i = 0; i < N; ++i) bias(i, 0) = g.nodes[i].bias;
  const Tensor onehot = onehot_layers(g, F);

  if (v != GmnVariant::ScalePositive) normalize_per_layer(g, bias, w);

  Var H, E;
  if (v == GmnVariant::Plain) {
    const Var feats[] = {tape.constant(bias), tape.constant(onehot)};
    H = tape.add(tape.matmul(tape.concat_cols(feats), p["init.v.w"]), p["init.v.b"]);
    E = tape.add(tape.matmul(tape.constant(w), p["init.e.w"]), p["init.e.b"]);
    for (std::size_t t = 0; t < T; ++t) {
      const std::string pre = it(t);
      Var hd = tape.gather_rows(H, dst);
      Var hs = tape.gather_rows(H, src);
      const Var edge_in[] = {hd, hs, E};
      Var ein = tape.concat_cols(edge_in);
      Var m = tape.scatter_add_rows(mlp(tape, p, pre + ".msg", ein), dst, N);
      const Var node_in[] = {H, m};
      Var H_next = mlp(tape, p, pre + ".upd", tape.concat_cols(node_in));
      if (t + 1 < T) E = mlp(tape, p, pre + ".edge", ein);
      H = H_next;
    }
  } else {
    // Hidden neurons get a scale-equivariant state; input and output neurons
    // carry no scale, so they additionally get a free layer embedding.
    Var b = tape.constant(bias);
    Var oh = tape.constant(onehot);
    const Var inv_parts[] = {canon(tape, v, p, "init.v.canon", b), oh};
    Var h_eq = tape.mul(tape.matmul(b, p["init.v.gamma"]),
                        gate(tape, p, "init.v.rho", tape.concat_cols(inv_parts)));
    Tensor fixed_mask = Tensor::matrix(N, 1);
    for (std::size_t i = 0; i < N; ++i)
      fixed_mask(i, 0) = g.nodes[i].kind == NodeKind::Hidden ? 0.0 : 1.0;
    Var fixed = tape.add(tape.matmul(oh, p["init.fixed.w"]), p["init.fixed.b"]);
    H = tape.add(h_eq, tape.mul(fixed, tape.constant(fixed_mask)));
    E = tape.matmul(tape.constant(w), p["init.e.gamma"]);
    // In-degree is a layer width, so this rescaling commutes with the symmetry.
    Tensor deg = Tensor::matrix(N, 1);
    for (std::size_t k = 0; k < M; ++k) deg(dst[k], 0) += 1.0;
    for (auto& x : deg.data()) x = x > 0.0 ? 1.0 / std::sqrt(x) : 0.0;
    Var inv_sqrt_deg = tape.constant(std::move(deg));

    for (std::size_t t = 0; t < T; ++t) {
      const std::string pre = it(t);
      Var ch = canon(tape, v, p, pre + ".canon.h", H);
      Var hd = tape.gather_rows(H, dst);
      Var hs = tape.gather_rows(H, src);
      Var chd = tape.gather_rows(ch, dst);
      Var msg = msg_se_impl(tape, v, p, pre, hd, chd, hs, E);
      Var m = tape.mul(tape.scatter_add_rows(msg, dst, N), inv_sqrt_deg);
      Var H_next = upd_se_impl(tape, v, p, pre, H, ch, m);
      if (t + 1 < T) {
        const Var parts[] = {canon(tape, v, p, pre + ".canon.e", E), chd,
                             tape.gather_rows(ch, src)};
        E = tape.mul(tape.matmul(E, p[pre + ".edge.g"]),
                     gate(tape, p, pre + ".edge.rho", tape.concat_cols(parts)));
      }
      H = H_next;
    }
    H = canon(tape, v, p, "readout.canon", H);
  }

  // Sum-pool, scaled by 1/sqrt(count) to keep the readout input O(1).
  Var pooled;
  std::size_t count = N;
  if (config.readout == ReadoutMode::FullGraph) {
    pooled = tape.sum_rows(H);
  } else {
    std::vector<std::size_t> out_ids;
    for (std::size_t i = 0; i < N; ++i)
      if (g.nodes[i].kind == NodeKind::Output) out_ids.push_back(i);
    count = out_ids.size();
    pooled = tape.sum_rows(tape.gather_rows(H, out_ids));
  }
  pooled = tape.scale(pooled, 1.0 / std::sqrt(static_cast<double>(count)));
  return mlp(tape, p, "readout.mlp", pooled);
}

Tensor encode(const Network& net, const GmnParams& params) {
  check_variant(params.config.variant, net.hidden);
  Tape tape;
  BoundParams p(tape, params.params, false);
  Var z = encode_on_tape(tape, p, params.config, to_graph(net));
  return tape.value(z);
}

}  // namespace symcanon
