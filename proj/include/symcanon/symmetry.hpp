#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symcanon/checkpoint.hpp"
#include "symcanon/network.hpp"

namespace symcanon {

enum class ScaleDomain { Identity, SignFlip, Positive };

std::string domain_name(ScaleDomain d);
ScaleDomain parse_domain(const std::string& name);
// Throws if the domain does not preserve functions for this activation:
// sign flips need an odd activation (sine, tanh), positive scales need relu.
void check_domain(ScaleDomain d, const Activation& act);

// Group element for one hidden layer. Neuron i of the transformed layer is
// scale[i] times neuron perm[i] of the original, i.e. the matrix T with
// T(i, perm[i]) = scale[i].
struct LayerTransform {
  std::vector<std::size_t> perm;
  std::vector<double> scale;

  std::size_t width() const { return perm.size(); }
  static LayerTransform identity(std::size_t n);
  Tensor matrix() const;
  friend bool operator==(const LayerTransform&, const LayerTransform&) = default;
};

// One LayerTransform per hidden layer; the input and output layers are fixed.
struct NetworkTransform {
  std::vector<LayerTransform> layers;
  ScaleDomain domain = ScaleDomain::Identity;

  static NetworkTransform identity(const Arch& arch, ScaleDomain domain);
  friend bool operator==(const NetworkTransform&, const NetworkTransform&) = default;
};

// Throws unless perms are bijections, widths match the hidden widths of
// `arch`, and scales lie in the declared domain.
void validate(const NetworkTransform& t, const Arch& arch);

// W'_l = T_l W_l T_{l-1}^{-1}, b'_l = T_l b_l with T_0 = T_L = I.
Network apply(const NetworkTransform& t, const Network& net);

// Uniform permutations; signs uniform on {+1, -1}; positive scales
// log-uniform on [1/4, 4].
NetworkTransform sample_transform(const Arch& arch, ScaleDomain domain, bool include_perm,
                                  bool include_scale, std::uint64_t seed);

// apply(compose(g, h), net) == apply(g, apply(h, net)).
NetworkTransform compose(const NetworkTransform& g, const NetworkTransform& h);
NetworkTransform invert(const NetworkTransform& g);

// i.i.d. Gaussian noise with per-layer std sigma * std(layer weights), on
// both weights and biases of every layer.
Network perturb(const Network& net, double sigma, std::uint64_t seed);

Json transform_to_json(const NetworkTransform& t);
NetworkTransform transform_from_json(const Json& j);

}  // namespace symcanon
