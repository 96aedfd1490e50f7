#include "symcanon/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "symcanon/error.hpp"
#include "symcanon/rng.hpp"

namespace symcanon {

double Activation::operator()(double x) const {
  switch (kind) {
    case ActKind::Sine: return std::sin(omega * x);
    case ActKind::Tanh: return std::tanh(x);
    case ActKind::Relu: return x > 0.0 ? x : 0.0;
    case ActKind::Identity: return x;
  }
  return x;
}

Var Activation::apply(Tape& tape, Var x) const {
  switch (kind) {
    case ActKind::Sine: return tape.sin(omega == 1.0 ? x : tape.scale(x, omega));
    case ActKind::Tanh: return tape.tanh(x);
    case ActKind::Relu: return tape.relu(x);
    case ActKind::Identity: return x;
  }
  return x;
}

std::string Activation::name() const {
  switch (kind) {
    case ActKind::Sine: return "sine";
    case ActKind::Tanh: return "tanh";
    case ActKind::Relu: return "relu";
    case ActKind::Identity: return "identity";
  }
  return "?";
}

Activation parse_activation(const std::string& name, double omega) {
  if (name == "sine") {
    require(omega > 0.0, "sine activation requires omega > 0");
    return Activation::sine(omega);
  }
  if (name == "tanh") return Activation::tanh();
  if (name == "relu") return Activation::relu();
  if (name == "identity") return Activation::identity();
  throw Error("unknown activation '" + name + "'");
}

std::size_t Arch::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
  return n;
}

std::string Arch::str() const {
  std::string s;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) s += "-";
    s += std::to_string(widths[i]);
  }
  return s;
}

Arch parse_arch(const std::string& spec) {
  Arch arch;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, '-')) {
    require(!tok.empty() && std::all_of(tok.begin(), tok.end(), ::isdigit),
            "bad architecture string '" + spec + "'");
    arch.widths.push_back(std::stoul(tok));
    require(arch.widths.back() >= 1, "architecture widths must be >= 1: '" + spec + "'");
  }
  require(arch.widths.size() >= 2, "architecture needs at least input and output: '" + spec + "'");
  return arch;
}

Arch Network::arch() const {
  Arch a;
  if (layers.empty()) return a;
  a.widths.push_back(layers.front().in);
  for (const auto& l : layers) a.widths.push_back(l.out);
  return a;
}

void validate(const Network& net) {
  require(!net.layers.empty(), "network must have at least one layer");
  if (net.hidden.kind == ActKind::Sine) require(net.hidden.omega > 0.0, "sine omega must be > 0");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& L = net.layers[l];
    const std::string at = "layers[" + std::to_string(l) + "]";
    require(L.in >= 1 && L.out >= 1, at + ": empty layer");
    require(L.weight.size() == L.in * L.out, at + ".w: expected " + std::to_string(L.in * L.out) +
                                                 " values, got " + std::to_string(L.weight.size()));
    require(L.bias.size() == L.out, at + ".b: expected " + std::to_string(L.out) +
                                        " values, got " + std::to_string(L.bias.size()));
    if (l > 0)
      require(L.in == net.layers[l - 1].out, at + ".in: does not match previous layer output");
  }
}

std::vector<double> forward_one(const Network& net, std::span<const double> x) {
  require(x.size() == net.input_dim(), "forward: input dim " + std::to_string(x.size()) +
                                           " != network input " + std::to_string(net.input_dim()));
  std::vector<double> cur(x.begin(), x.end()), next;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& L = net.layers[l];
    next.assign(L.out, 0.0);
    for (std::size_t r = 0; r < L.out; ++r) {
      double s = L.bias[r];
      const double* wr = L.weight.data() + r * L.in;
      for (std::size_t c = 0; c < L.in; ++c) s += wr[c] * cur[c];
      next[r] = (l + 1 < net.layers.size()) ? net.hidden(s) : s;
    }
    cur.swap(next);
  }
  return cur;
}

Tensor forward(const Network& net, const Tensor& inputs) {
  require(inputs.cols() == net.input_dim(),
          "forward: input dim " + std::to_string(inputs.cols()) + " != network input " +
              std::to_string(net.input_dim()));
  Tensor out = Tensor::matrix(inputs.rows(), net.output_dim());
  for (std::size_t b = 0; b < inputs.rows(); ++b) {
    auto y = forward_one(net, std::span<const double>(inputs.data().data() + b * inputs.cols(),
                                                      inputs.cols()));
    std::copy(y.begin(), y.end(), out.data().begin() + static_cast<std::ptrdiff_t>(b * y.size()));
  }
  return out;
}

Var forward_on_tape(Tape& tape, std::span<const Var> weights, std::span<const Var> biases,
                    const Activation& hidden, Var inputs) {
  require(weights.size() == biases.size() && !weights.empty(),
          "forward_on_tape: weight/bias count mismatch");
  Var h = inputs;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = tape.add(tape.matmul_nt(h, weights[l]), biases[l]);
    if (l + 1 < weights.size()) h = hidden.apply(tape, h);
  }
  return h;
}

std::vector<double> flatten(const Network& net) {
  std::vector<double> v;
  for (const auto& L : net.layers) {
    v.insert(v.end(), L.weight.begin(), L.weight.end());
    v.insert(v.end(), L.bias.begin(), L.bias.end());
  }
  return v;
}

Network zeros_like(const Arch& arch, const Activation& hidden) {
  require(arch.widths.size() >= 2, "architecture needs at least two widths");
  Network net;
  net.hidden = hidden;
  for (std::size_t l = 0; l + 1 < arch.widths.size(); ++l)
    net.layers.emplace_back(arch.widths[l], arch.widths[l + 1]);
  return net;
}

Network unflatten(std::span<const double> params, const Arch& arch, const Activation& hidden) {
  require(params.size() == arch.param_count(),
          "unflatten: got " + std::to_string(params.size()) + " values, architecture " +
              arch.str() + " needs " + std::to_string(arch.param_count()));
  Network net = zeros_like(arch, hidden);
  std::size_t k = 0;
  for (auto& L : net.layers) {
    for (auto& w : L.weight) w = params[k++];
    for (auto& b : L.bias) b = params[k++];
  }
  return net;
}

Network init_siren(const Arch& arch, double omega, std::uint64_t seed) {
  Pcg32 rng(seed);
  Network net = zeros_like(arch, Activation::sine(omega));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& L = net.layers[l];
    const double fan = static_cast<double>(L.in);
    const double wb = l == 0 ? 1.0 / fan : std::sqrt(6.0 / fan) / omega;
    const double bb = 1.0 / std::sqrt(fan);
    for (auto& w : L.weight) w = rng.uniform(-wb, wb);
    for (auto& b : L.bias) b = rng.uniform(-bb, bb);
  }
  return net;
}

Network init_mlp(const Arch& arch, const Activation& hidden, std::uint64_t seed) {
  Pcg32 rng(seed);
  Network net = zeros_like(arch, hidden);
  for (auto& L : net.layers) {
    const double fan = static_cast<double>(L.in);
    const double wb = hidden.kind == ActKind::Relu ? std::sqrt(6.0 / fan) : std::sqrt(3.0 / fan);
    const double bb = 1.0 / std::sqrt(fan);
    for (auto& w : L.weight) w = rng.uniform(-wb, wb);
    for (auto& b : L.bias) b = rng.uniform(-bb, bb);
  }
  return net;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require(a.size() == b.size(), "max_abs_diff: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Network round_to_float(const Network& net) {
  Network out = net;
  for (auto& L : out.layers) {
    for (auto& w : L.weight) w = static_cast<double>(static_cast<float>(w));
    for (auto& b : L.bias) b = static_cast<double>(static_cast<float>(b));
  }
  return out;
}

}  // namespace symcanon
