#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "symcanon/adam.hpp"
#include "symcanon/network.hpp"
#include "symcanon/tape.hpp"

namespace symcanon {

// ---------------------------------------------------------------------------
// Networks as graphs: one node per neuron (inputs included), one directed
// edge per weight from neuron j of layer l-1 to neuron i of layer l.

enum class NodeKind { Input, Hidden, Output };

struct GraphNode {
  std::size_t layer = 0;     // 0 = input layer
  std::size_t position = 0;  // index within the layer
  double bias = 0.0;         // 0 for input neurons
  NodeKind kind = NodeKind::Input;
};

struct GraphEdge {
  std::size_t src = 0;  // node id in layer l-1
  std::size_t dst = 0;  // node id in layer l
  double weight = 0.0;
};

struct NetGraph {
  std::vector<GraphNode> nodes;  // layer-major, position-minor
  std::vector<GraphEdge> edges;  // grouped by layer, then dst row, then src column
  std::size_t depth = 0;         // number of dense layers

  std::size_t node_id(std::size_t layer, std::size_t position) const;
  std::vector<std::size_t> layer_offsets;  // first node id of each layer
};

NetGraph to_graph(const Network& net);

// ---------------------------------------------------------------------------
// Encoder configuration and parameters.

enum class GmnVariant { Plain, ScaleSign, ScalePositive };
enum class ReadoutMode { FullGraph, LastLayer };

std::string variant_name(GmnVariant v);
GmnVariant parse_variant(const std::string& name);
std::string readout_name(ReadoutMode r);
ReadoutMode parse_readout(const std::string& name);
// Plain accepts any activation; scale_sign needs sine/tanh; scale_positive needs relu.
void check_variant(GmnVariant v, const Activation& act);

struct GmnConfig {
  GmnVariant variant = GmnVariant::ScaleSign;
  std::size_t hidden_dim = 32;
  std::size_t n_iterations = 2;
  std::size_t latent_dim = 32;
  std::size_t max_depth = 8;
  ReadoutMode readout = ReadoutMode::FullGraph;
};

struct GmnParams {
  GmnConfig config;
  ParamSet params;
};

GmnParams init_gmn(const GmnConfig& config, std::uint64_t seed);

// Parameters recorded on a tape, addressable by name.
class BoundParams {
 public:
  BoundParams(const ParamSet& set, std::vector<Var> vars) : set_(&set), vars_(std::move(vars)) {}
  BoundParams(Tape& tape, const ParamSet& set, bool requires_grad)
      : BoundParams(set, set.bind(tape, requires_grad)) {}
  Var operator[](const std::string& name) const { return vars_[set_->index(name)]; }
  const std::vector<Var>& vars() const { return vars_; }

 private:
  const ParamSet* set_;
  std::vector<Var> vars_;
};

// ---------------------------------------------------------------------------
// Building blocks. All operate row-wise: each row is one node or edge state.

// Two-layer perceptron prefix.l0 -> SiLU -> prefix.l1.
Var mlp(Tape& tape, const BoundParams& p, const std::string& prefix, Var x);

// 1 + tanh(MLP(x)): a bounded multiplicative gate.
Var gate(Tape& tape, const BoundParams& p, const std::string& prefix, Var x);

// MLP(x) + MLP(-x); exactly even in x.
Var canon_sign(Tape& tape, const BoundParams& p, const std::string& prefix, Var x);
// x / ||x|| per row, 0 for a zero row.
Var canon_pos(Tape& tape, Var x);
// Variant-specific canon (plain has none and must not call this).
Var canon(Tape& tape, GmnVariant v, const BoundParams& p, const std::string& prefix, Var x);

// (y Gamma_y) .* (e Gamma_e)
Var rescale_eq(Tape& tape, Var y, Var e, Var gamma_y, Var gamma_e);

// (sum_i x_i Gamma_i) .* gate(invariants). All x_i in one row must share that
// row's scale factor; `invariants` must be scale-invariant features.
Var scale_eq(Tape& tape, std::span<const Var> xs, std::span<const Var> gammas,
             const BoundParams& p, const std::string& rho_prefix, Var invariants);

// Same, with invariants = concat(canon(x_1), ..., canon(x_n)) computed here;
// canon input k uses the MLP under canon_prefixes[k] for the sign variant.
Var scale_eq(Tape& tape, GmnVariant v, std::span<const Var> xs, std::span<const Var> gammas,
             const BoundParams& p, const std::string& rho_prefix,
             std::span<const std::string> canon_prefixes);

// Message and node update of iteration t for the scale variants:
//   MSG_SE(x, y, e) = ScaleEq[x, ReScaleEq(y, e)],  UPD_SE(x, m) = ScaleEq[x, m].
Var msg_se(Tape& tape, GmnVariant v, const BoundParams& p, std::size_t t, Var x, Var y, Var e);
Var upd_se(Tape& tape, GmnVariant v, const BoundParams& p, std::size_t t, Var x, Var m);

// Full encoder; returns a 1 x latent_dim row.
Var encode_on_tape(Tape& tape, const BoundParams& p, const GmnConfig& config, const NetGraph& g);

Tensor encode(const Network& net, const GmnParams& params);

}  // namespace symcanon
