#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "symcanon/tensor.hpp"

namespace symcanon {

enum class Op {
  Leaf,
  MatMul,    // a[n,k] * b[k,m]
  MatMulNT,  // a[n,k] * b[m,k]^T
  Add,       // b may broadcast over rows and/or cols of a
  Sub,
  Mul,
  Scale,
  Sin,
  Tanh,
  Relu,
  Silu,
  Exp,
  Log,
  Sum,      // all elements -> [1]
  SumRows,  // [n,m] -> [1,m]
  Mean,     // all elements -> [1]
  L2Norm,   // all elements -> [1]
  RowNormalize,
  SoftmaxRows,
  LogSoftmaxRows,
  ConcatCols,
  GatherRows,
  ScatterAddRows,
  View,  // contiguous slice of a, reshaped
};

std::string_view op_name(Op op);

// Handle to a node on a Tape. Only meaningful for the tape that created it.
struct Var {
  std::size_t id = 0;
};

struct TapeNode {
  Op op = Op::Leaf;
  std::vector<std::size_t> inputs;
  Tensor value;
  Tensor adjoint;
  bool requires_grad = false;
  double constant = 0.0;
  std::vector<std::size_t> index;
  std::size_t offset = 0;
  std::size_t out_rows = 0;
  std::vector<std::size_t> out_shape;
};

// Define-by-run reverse-mode tape. Values are computed eagerly when a node is
// recorded; forward() recomputes every non-leaf node from the current leaf
// values, which is what finite-difference checks use after set_leaf().
class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var neg(Var a) { return scale(a, -1.0); }
  Var sin(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var silu(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sum(Var a);
  Var sum_rows(Var a);
  Var mean(Var a);
  Var l2_norm(Var a);
  Var row_normalize(Var a);
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);
  Var concat_cols(std::span<const Var> parts);
  Var gather_rows(Var a, std::vector<std::size_t> rows);
  Var scatter_add_rows(Var a, std::vector<std::size_t> rows, std::size_t out_rows);
  Var view(Var a, std::size_t offset, std::vector<std::size_t> shape);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  // Adjoint from the last backward(); zero-filled for nodes it did not reach.
  const Tensor& grad(Var v) const;
  const TapeNode& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  void set_leaf(Var v, Tensor value);
  Tensor forward();
  void backward(Var loss);

 private:
  Var push(TapeNode node);
  void compute(TapeNode& node, std::size_t id) const;
  void propagate(std::size_t id);
  Tensor& adj(std::size_t id);

  std::vector<TapeNode> nodes_;
};

// Re-evaluates the whole tape and returns the final node's value.
Tensor eval_graph(Tape& tape);

}  // namespace symcanon
