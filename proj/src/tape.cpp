#include "symcanon/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "symcanon/error.hpp"

namespace symcanon {

namespace {

// c[n,m] += a[n,k] * b[k,m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[n,m] += a[n,k] * b[m,k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] += s;
    }
  }
}

// c[n,m] += a[k,n]^T * b[k,m]
void gemm_tn(const double* a, const double* b, double* c, std::size_t k, std::size_t n,
             std::size_t m) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * n;
    const double* bp = b + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = ap[i];
      if (av == 0.0) continue;
      double* ci = c + i * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

[[noreturn]] void shape_error(std::size_t id, Op op, const std::string& detail) {
  throw Error("tape node " + std::to_string(id) + " (" + std::string(op_name(op)) +
              "): " + detail);
}

bool broadcastable(const Tensor& a, const Tensor& b) {
  return (b.rows() == a.rows() || b.rows() == 1) && (b.cols() == a.cols() || b.cols() == 1);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::MatMulNT: return "matmul_nt";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::Sin: return "sin";
    case Op::Tanh: return "tanh";
    case Op::Relu: return "relu";
    case Op::Silu: return "silu";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sum: return "sum";
    case Op::SumRows: return "sum_rows";
    case Op::Mean: return "mean";
    case Op::L2Norm: return "l2_norm";
    case Op::RowNormalize: return "row_normalize";
    case Op::SoftmaxRows: return "softmax_rows";
    case Op::LogSoftmaxRows: return "log_softmax_rows";
    case Op::ConcatCols: return "concat_cols";
    case Op::GatherRows: return "gather_rows";
    case Op::ScatterAddRows: return "scatter_add_rows";
    case Op::View: return "view";
  }
  return "?";
}

Var Tape::push(TapeNode node) {
  for (auto in : node.inputs) {
    require(in < nodes_.size(), "tape input refers to unknown node " + std::to_string(in));
    node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  }
  compute(node, nodes_.size());
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  TapeNode n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

namespace {
TapeNode make(Op op, std::initializer_list<Var> in) {
  TapeNode n;
  n.op = op;
  for (auto v : in) n.inputs.push_back(v.id);
  return n;
}
}  // namespace

Var Tape::matmul(Var a, Var b) { return push(make(Op::MatMul, {a, b})); }
Var Tape::matmul_nt(Var a, Var b) { return push(make(Op::MatMulNT, {a, b})); }
Var Tape::add(Var a, Var b) { return push(make(Op::Add, {a, b})); }
Var Tape::sub(Var a, Var b) { return push(make(Op::Sub, {a, b})); }
Var Tape::mul(Var a, Var b) { return push(make(Op::Mul, {a, b})); }
Var Tape::scale(Var a, double c) {
  auto n = make(Op::Scale, {a});
  n.constant = c;
  return push(std::move(n));
}
Var Tape::sin(Var a) { return push(make(Op::Sin, {a})); }
Var Tape::tanh(Var a) { return push(make(Op::Tanh, {a})); }
Var Tape::relu(Var a) { return push(make(Op::Relu, {a})); }
Var Tape::silu(Var a) { return push(make(Op::Silu, {a})); }
Var Tape::exp(Var a) { return push(make(Op::Exp, {a})); }
Var Tape::log(Var a) { return push(make(Op::Log, {a})); }
Var Tape::sum(Var a) { return push(make(Op::Sum, {a})); }
Var Tape::sum_rows(Var a) { return push(make(Op::SumRows, {a})); }
Var Tape::mean(Var a) { return push(make(Op::Mean, {a})); }
Var Tape::l2_norm(Var a) { return push(make(Op::L2Norm, {a})); }
Var Tape::row_normalize(Var a) { return push(make(Op::RowNormalize, {a})); }
Var Tape::softmax_rows(Var a) { return push(make(Op::SoftmaxRows, {a})); }
Var Tape::log_softmax_rows(Var a) { return push(make(Op::LogSoftmaxRows, {a})); }

Var Tape::concat_cols(std::span<const Var> parts) {
  TapeNode n;
  n.op = Op::ConcatCols;
  for (auto v : parts) n.inputs.push_back(v.id);
  return push(std::move(n));
}

Var Tape::gather_rows(Var a, std::vector<std::size_t> rows) {
  auto n = make(Op::GatherRows, {a});
  n.index = std::move(rows);
  return push(std::move(n));
}

Var Tape::scatter_add_rows(Var a, std::vector<std::size_t> rows, std::size_t out_rows) {
  auto n = make(Op::ScatterAddRows, {a});
  n.index = std::move(rows);
  n.out_rows = out_rows;
  return push(std::move(n));
}

Var Tape::view(Var a, std::size_t offset, std::vector<std::size_t> shape) {
  auto n = make(Op::View, {a});
  n.offset = offset;
  n.out_shape = std::move(shape);
  return push(std::move(n));
}

void Tape::compute(TapeNode& node, std::size_t id) const {
  auto in = [&](std::size_t k) -> const Tensor& { return nodes_[node.inputs[k]].value; };
  auto unary = [&](auto f) {
    const Tensor& a = in(0);
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    node.value = std::move(out);
  };

  switch (node.op) {
    case Op::Leaf:
      return;
    case Op::MatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.cols() != b.rows())
        shape_error(id, node.op, "inner dims " + a.shape_str() + " * " + b.shape_str());
      Tensor out = Tensor::matrix(a.rows(), b.cols());
      gemm_nn(a.data().data(), b.data().data(), out.data().data(), a.rows(), a.cols(), b.cols());
      node.value = std::move(out);
      return;
    }
    case Op::MatMulNT: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.cols() != b.cols())
        shape_error(id, node.op, "inner dims " + a.shape_str() + " * " + b.shape_str() + "^T");
      Tensor out = Tensor::matrix(a.rows(), b.rows());
      gemm_nt(a.data().data(), b.data().data(), out.data().data(), a.rows(), a.cols(), b.rows());
      node.value = std::move(out);
      return;
    }
    case Op::Add:
    case Op::Sub:
    case Op::Mul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (!broadcastable(a, b))
        shape_error(id, node.op, "cannot broadcast " + b.shape_str() + " onto " + a.shape_str());
      Tensor out(a.shape());
      const std::size_t R = a.rows(), C = a.cols();
      const bool br = b.rows() == 1 && R != 1, bc = b.cols() == 1 && C != 1;
      for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < C; ++c) {
          double bv = b[(br ? 0 : r) * b.cols() + (bc ? 0 : c)];
          double av = a[r * C + c];
          out[r * C + c] = node.op == Op::Add ? av + bv : node.op == Op::Sub ? av - bv : av * bv;
        }
      }
      node.value = std::move(out);
      return;
    }
    case Op::Scale: {
      double c = node.constant;
      unary([c](double x) { return c * x; });
      return;
    }
    case Op::Sin: unary([](double x) { return std::sin(x); }); return;
    case Op::Tanh: unary([](double x) { return std::tanh(x); }); return;
    case Op::Relu: unary([](double x) { return x > 0.0 ? x : 0.0; }); return;
    case Op::Silu: unary([](double x) { return x * sigmoid(x); }); return;
    case Op::Exp: unary([](double x) { return std::exp(x); }); return;
    case Op::Log: unary([](double x) { return std::log(x); }); return;
    case Op::Sum:
    case Op::Mean: {
      const Tensor& a = in(0);
      double s = 0.0;
      for (double v : a.data()) s += v;
      if (node.op == Op::Mean) s /= static_cast<double>(a.size());
      node.value = Tensor::scalar(s);
      return;
    }
    case Op::L2Norm: {
      double s = 0.0;
      for (double v : in(0).data()) s += v * v;
      node.value = Tensor::scalar(std::sqrt(s));
      return;
    }
    case Op::SumRows: {
      const Tensor& a = in(0);
      Tensor out = Tensor::matrix(1, a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out[c] += a(r, c);
      node.value = std::move(out);
      return;
    }
    case Op::RowNormalize: {
      const Tensor& a = in(0);
      Tensor out(a.shape());
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) s += a(r, c) * a(r, c);
        double n = std::sqrt(s);
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = n > 0.0 ? a(r, c) / n : 0.0;
      }
      node.value = std::move(out);
      return;
    }
    case Op::SoftmaxRows:
    case Op::LogSoftmaxRows: {
      const Tensor& a = in(0);
      Tensor out(a.shape());
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double mx = a(r, 0);
        for (std::size_t c = 1; c < a.cols(); ++c) mx = std::max(mx, a(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) z += std::exp(a(r, c) - mx);
        double lse = mx + std::log(z);
        for (std::size_t c = 0; c < a.cols(); ++c)
          out(r, c) = node.op == Op::SoftmaxRows ? std::exp(a(r, c) - lse) : a(r, c) - lse;
      }
      node.value = std::move(out);
      return;
    }
    case Op::ConcatCols: {
      if (node.inputs.empty()) shape_error(id, node.op, "no inputs");
      const std::size_t R = in(0).rows();
      std::size_t C = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        if (in(k).rows() != R)
          shape_error(id, node.op, "row mismatch at input " + std::to_string(k) + ": " +
                                       in(k).shape_str());
        C += in(k).cols();
      }
      Tensor out = Tensor::matrix(R, C);
      for (std::size_t r = 0; r < R; ++r) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
          const Tensor& p = in(k);
          std::copy_n(p.data().begin() + static_cast<std::ptrdiff_t>(r * p.cols()), p.cols(),
                      out.data().begin() + static_cast<std::ptrdiff_t>(r * C + off));
          off += p.cols();
        }
      }
      node.value = std::move(out);
      return;
    }
    case Op::GatherRows: {
      const Tensor& a = in(0);
      if (node.index.empty()) shape_error(id, node.op, "empty index");
      Tensor out = Tensor::matrix(node.index.size(), a.cols());
      for (std::size_t r = 0; r < node.index.size(); ++r) {
        if (node.index[r] >= a.rows())
          shape_error(id, node.op, "row index " + std::to_string(node.index[r]) + " out of range");
        std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(node.index[r] * a.cols()),
                    a.cols(), out.data().begin() + static_cast<std::ptrdiff_t>(r * a.cols()));
      }
      node.value = std::move(out);
      return;
    }
    case Op::ScatterAddRows: {
      const Tensor& a = in(0);
      if (node.index.size() != a.rows())
        shape_error(id, node.op, "index length " + std::to_string(node.index.size()) +
                                     " != rows " + std::to_string(a.rows()));
      Tensor out = Tensor::matrix(node.out_rows, a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r) {
        if (node.index[r] >= node.out_rows)
          shape_error(id, node.op, "target row " + std::to_string(node.index[r]) + " out of range");
        double* dst = out.data().data() + node.index[r] * a.cols();
        const double* src = a.data().data() + r * a.cols();
        for (std::size_t c = 0; c < a.cols(); ++c) dst[c] += src[c];
      }
      node.value = std::move(out);
      return;
    }
    case Op::View: {
      const Tensor& a = in(0);
      std::size_t n = 1;
      for (auto d : node.out_shape) n *= d;
      if (node.offset + n > a.size())
        shape_error(id, node.op, "slice [" + std::to_string(node.offset) + ", " +
                                     std::to_string(node.offset + n) + ") exceeds " +
                                     a.shape_str());
      std::vector<double> data(a.data().begin() + static_cast<std::ptrdiff_t>(node.offset),
                               a.data().begin() + static_cast<std::ptrdiff_t>(node.offset + n));
      node.value = Tensor(node.out_shape, std::move(data));
      return;
    }
  }
}

void Tape::set_leaf(Var v, Tensor value) {
  TapeNode& n = nodes_.at(v.id);
  require(n.op == Op::Leaf, "set_leaf on non-leaf node " + std::to_string(v.id));
  require(n.value.shape() == value.shape(), "set_leaf shape change on node " + std::to_string(v.id));
  n.value = std::move(value);
}

Tensor Tape::forward() {
  require(!nodes_.empty(), "forward on empty tape");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op != Op::Leaf) compute(nodes_[i], i);
  }
  return nodes_.back().value;
}

Tensor eval_graph(Tape& tape) { return tape.forward(); }

}  // namespace symcanon

namespace symcanon {

Tensor& Tape::adj(std::size_t id) {
  TapeNode& n = nodes_[id];
  if (n.adjoint.size() != n.value.size()) n.adjoint = Tensor(n.value.shape(), 0.0);
  return n.adjoint;
}

const Tensor& Tape::grad(Var v) const {
  const TapeNode& n = nodes_.at(v.id);
  require(n.adjoint.size() == n.value.size(),
          "no adjoint for node " + std::to_string(v.id) + "; call backward() first");
  return n.adjoint;
}

void Tape::backward(Var loss) {
  require(loss.id < nodes_.size(), "backward from unknown node");
  require(nodes_[loss.id].value.size() == 1,
          "backward requires a scalar loss, node " + std::to_string(loss.id) + " has shape " +
              nodes_[loss.id].value.shape_str());
  for (auto& n : nodes_) n.adjoint = Tensor(n.value.shape(), 0.0);
  nodes_[loss.id].adjoint[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].op != Op::Leaf && nodes_[i].requires_grad) propagate(i);
  }
}

void Tape::propagate(std::size_t id) {
  TapeNode& node = nodes_[id];
  const Tensor& g = node.adjoint;
  const Tensor& y = node.value;
  auto input = [&](std::size_t k) -> TapeNode& { return nodes_[node.inputs[k]]; };
  auto wants = [&](std::size_t k) { return input(k).requires_grad; };

  auto unary = [&](auto dfdx) {
    if (!wants(0)) return;
    TapeNode& a = input(0);
    Tensor& ga = adj(node.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(a.value[i], y[i]);
  };

  switch (node.op) {
    case Op::Leaf:
      return;
    case Op::MatMul: {
      const Tensor& a = input(0).value;
      const Tensor& b = input(1).value;
      if (wants(0))
        gemm_nt(g.data().data(), b.data().data(), adj(node.inputs[0]).data().data(), a.rows(),
                b.cols(), a.cols());
      if (wants(1))
        gemm_tn(a.data().data(), g.data().data(), adj(node.inputs[1]).data().data(), a.rows(),
                a.cols(), b.cols());
      return;
    }
    case Op::MatMulNT: {
      const Tensor& a = input(0).value;
      const Tensor& b = input(1).value;
      if (wants(0))
        gemm_nn(g.data().data(), b.data().data(), adj(node.inputs[0]).data().data(), a.rows(),
                b.rows(), a.cols());
      if (wants(1))
        gemm_tn(g.data().data(), a.data().data(), adj(node.inputs[1]).data().data(), a.rows(),
                b.rows(), a.cols());
      return;
    }
    case Op::Add:
    case Op::Sub:
    case Op::Mul: {
      const Tensor& a = input(0).value;
      const Tensor& b = input(1).value;
      const std::size_t R = a.rows(), C = a.cols();
      const bool br = b.rows() == 1 && R != 1, bc = b.cols() == 1 && C != 1;
      Tensor* ga = wants(0) ? &adj(node.inputs[0]) : nullptr;
      Tensor* gb = wants(1) ? &adj(node.inputs[1]) : nullptr;
      for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t ia = r * C + c;
          const std::size_t ib = (br ? 0 : r) * b.cols() + (bc ? 0 : c);
          const double gv = g[ia];
          if (node.op == Op::Mul) {
            if (ga) (*ga)[ia] += gv * b[ib];
            if (gb) (*gb)[ib] += gv * a[ia];
          } else {
            if (ga) (*ga)[ia] += gv;
            if (gb) (*gb)[ib] += node.op == Op::Add ? gv : -gv;
          }
        }
      }
      return;
    }
    case Op::Scale: {
      const double c = node.constant;
      unary([c](double, double) { return c; });
      return;
    }
    case Op::Sin: unary([](double x, double) { return std::cos(x); }); return;
    case Op::Tanh: unary([](double, double t) { return 1.0 - t * t; }); return;
    case Op::Relu: unary([](double x, double) { return x > 0.0 ? 1.0 : 0.0; }); return;
    case Op::Silu:
      unary([](double x, double) {
        double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
      });
      return;
    case Op::Exp: unary([](double, double e) { return e; }); return;
    case Op::Log: unary([](double x, double) { return 1.0 / x; }); return;
    case Op::Sum:
    case Op::Mean: {
      if (!wants(0)) return;
      Tensor& ga = adj(node.inputs[0]);
      double gv = g[0];
      if (node.op == Op::Mean) gv /= static_cast<double>(ga.size());
      for (auto& v : ga.data()) v += gv;
      return;
    }
    case Op::L2Norm: {
      if (!wants(0) || y[0] == 0.0) return;
      const Tensor& a = input(0).value;
      Tensor& ga = adj(node.inputs[0]);
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[0] * a[i] / y[0];
      return;
    }
    case Op::SumRows: {
      if (!wants(0)) return;
      Tensor& ga = adj(node.inputs[0]);
      const std::size_t C = ga.cols();
      for (std::size_t r = 0; r < ga.rows(); ++r)
        for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += g[c];
      return;
    }
    case Op::RowNormalize: {
      if (!wants(0)) return;
      const Tensor& a = input(0).value;
      Tensor& ga = adj(node.inputs[0]);
      const std::size_t C = a.cols();
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0, dot = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
          s += a[r * C + c] * a[r * C + c];
          dot += y[r * C + c] * g[r * C + c];
        }
        double n = std::sqrt(s);
        if (n == 0.0) continue;
        for (std::size_t c = 0; c < C; ++c)
          ga[r * C + c] += (g[r * C + c] - y[r * C + c] * dot) / n;
      }
      return;
    }
    case Op::SoftmaxRows: {
      if (!wants(0)) return;
      Tensor& ga = adj(node.inputs[0]);
      const std::size_t C = y.cols();
      for (std::size_t r = 0; r < y.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < C; ++c) dot += g[r * C + c] * y[r * C + c];
        for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += y[r * C + c] * (g[r * C + c] - dot);
      }
      return;
    }
    case Op::LogSoftmaxRows: {
      if (!wants(0)) return;
      Tensor& ga = adj(node.inputs[0]);
      const std::size_t C = y.cols();
      for (std::size_t r = 0; r < y.rows(); ++r) {
        double gs = 0.0;
        for (std::size_t c = 0; c < C; ++c) gs += g[r * C + c];
        for (std::size_t c = 0; c < C; ++c)
          ga[r * C + c] += g[r * C + c] - std::exp(y[r * C + c]) * gs;
      }
      return;
    }
    case Op::ConcatCols: {
      const std::size_t R = y.rows(), C = y.cols();
      std::size_t off = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const std::size_t pc = input(k).value.cols();
        if (wants(k)) {
          Tensor& gk = adj(node.inputs[k]);
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < pc; ++c) gk[r * pc + c] += g[r * C + off + c];
        }
        off += pc;
      }
      return;
    }
    case Op::GatherRows: {
      if (!wants(0)) return;
      Tensor& ga = adj(node.inputs[0]);
      const std::size_t C = ga.cols();
      for (std::size_t r = 0; r < node.index.size(); ++r) {
        double* dst = ga.data().data() + node.index[r] * C;
        const double* src = g.data().data() + r * C;
        for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
      }
      return;
    }
    case Op::ScatterAddRows: {
      if (!wants(0)) return;
      Tensor& ga = adj(node.inputs[0]);
      const std::size_t C = ga.cols();
      for (std::size_t r = 0; r < node.index.size(); ++r) {
        double* dst = ga.data().data() + r * C;
        const double* src = g.data().data() + node.index[r] * C;
        for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
      }
      return;
    }
    case Op::View: {
      if (!wants(0)) return;
      Tensor& ga = adj(node.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[node.offset + i] += g[i];
      return;
    }
  }
}

}  // namespace symcanon
