#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "symcanon/tape.hpp"
#include "symcanon/tensor.hpp"

namespace symcanon {

enum class ActKind { Sine, Tanh, Relu, Identity };

// Hidden-layer nonlinearity. Sine means sin(omega * pre_activation).
struct Activation {
  ActKind kind = ActKind::Identity;
  double omega = 1.0;

  static Activation sine(double omega) { return {ActKind::Sine, omega}; }
  static Activation tanh() { return {ActKind::Tanh, 1.0}; }
  static Activation relu() { return {ActKind::Relu, 1.0}; }
  static Activation identity() { return {ActKind::Identity, 1.0}; }

  double operator()(double x) const;
  // Records the activation on a tape.
  Var apply(Tape& tape, Var x) const;
  std::string name() const;

  friend bool operator==(const Activation&, const Activation&) = default;
};

Activation parse_activation(const std::string& name, double omega = 30.0);

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // out x in, row-major
  std::vector<double> bias;    // out

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

  double& w(std::size_t r, std::size_t c) { return weight[r * in + c]; }
  double w(std::size_t r, std::size_t c) const { return weight[r * in + c]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Layer widths, input first: {2, 32, 32, 1}.
struct Arch {
  std::vector<std::size_t> widths;

  std::size_t depth() const { return widths.empty() ? 0 : widths.size() - 1; }
  std::size_t param_count() const;
  std::string str() const;
  friend bool operator==(const Arch&, const Arch&) = default;
};

Arch parse_arch(const std::string& spec);

// A dense feed-forward network: hidden layers use `hidden`, the final layer
// is always linear.
struct Network {
  std::vector<DenseLayer> layers;
  Activation hidden = Activation::identity();

  Arch arch() const;
  std::size_t input_dim() const { return layers.front().in; }
  std::size_t output_dim() const { return layers.back().out; }
  friend bool operator==(const Network&, const Network&) = default;
};

// Throws unless layer dims chain and bias lengths match.
void validate(const Network& net);

// inputs: batch x input_dim. Returns batch x output_dim.
Tensor forward(const Network& net, const Tensor& inputs);
std::vector<double> forward_one(const Network& net, std::span<const double> x);

// Differentiable forward. weights[l] is out x in, biases[l] is 1 x out.
Var forward_on_tape(Tape& tape, std::span<const Var> weights, std::span<const Var> biases,
                    const Activation& hidden, Var inputs);

// Order: layer 0..L-1, weight row-major then bias.
std::vector<double> flatten(const Network& net);
Network unflatten(std::span<const double> params, const Arch& arch, const Activation& hidden);

Network zeros_like(const Arch& arch, const Activation& hidden);
// SIREN initialisation: first layer U(-1/in, 1/in); later layers
// U(-sqrt(6/in)/omega, sqrt(6/in)/omega); biases U(-1/sqrt(in), 1/sqrt(in)).
Network init_siren(const Arch& arch, double omega, std::uint64_t seed);
// Uniform fan-in initialisation for tanh/relu classifiers.
Network init_mlp(const Arch& arch, const Activation& hidden, std::uint64_t seed);

double max_abs_diff(const Tensor& a, const Tensor& b);
// Rounds every stored value to float32 (what checkpoints hold).
Network round_to_float(const Network& net);

}  // namespace symcanon
