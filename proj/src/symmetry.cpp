#include "symcanon/symmetry.hpp"

#include <algorithm>
#include <cmath>

#include "symcanon/error.hpp"
#include "symcanon/rng.hpp"

namespace symcanon {

std::string domain_name(ScaleDomain d) {
  switch (d) {
    case ScaleDomain::Identity: return "identity";
    case ScaleDomain::SignFlip: return "sign_flip";
    case ScaleDomain::Positive: return "positive";
  }
  return "?";
}

ScaleDomain parse_domain(const std::string& name) {
  if (name == "identity") return ScaleDomain::Identity;
  if (name == "sign_flip") return ScaleDomain::SignFlip;
  if (name == "positive") return ScaleDomain::Positive;
  throw Error("unknown scale domain '" + name + "' (expected identity, sign_flip or positive)");
}

void check_domain(ScaleDomain d, const Activation& act) {
  if (d == ScaleDomain::SignFlip)
    require(act.kind == ActKind::Sine || act.kind == ActKind::Tanh,
            "sign_flip scaling requires a sine or tanh network, got " + act.name());
  if (d == ScaleDomain::Positive)
    require(act.kind == ActKind::Relu, "positive scaling requires a relu network, got " + act.name());
}

LayerTransform LayerTransform::identity(std::size_t n) {
  LayerTransform t;
  t.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.perm[i] = i;
  t.scale.assign(n, 1.0);
  return t;
}

Tensor LayerTransform::matrix() const {
  Tensor m = Tensor::matrix(width(), width());
  for (std::size_t i = 0; i < width(); ++i) m(i, perm[i]) = scale[i];
  return m;
}

NetworkTransform NetworkTransform::identity(const Arch& arch, ScaleDomain domain) {
  NetworkTransform t;
  t.domain = domain;
  for (std::size_t l = 1; l + 1 < arch.widths.size(); ++l)
    t.layers.push_back(LayerTransform::identity(arch.widths[l]));
  return t;
}

void validate(const NetworkTransform& t, const Arch& arch) {
  const std::size_t hidden = arch.widths.size() >= 2 ? arch.widths.size() - 2 : 0;
  require(t.layers.size() == hidden, "transform has " + std::to_string(t.layers.size()) +
                                         " layers, architecture " + arch.str() + " has " +
                                         std::to_string(hidden) + " hidden layers");
  for (std::size_t l = 0; l < t.layers.size(); ++l) {
    const auto& L = t.layers[l];
    const std::string at = "transform.layers[" + std::to_string(l) + "]";
    require(L.perm.size() == arch.widths[l + 1] && L.scale.size() == arch.widths[l + 1],
            at + ": width does not match architecture " + arch.str());
    std::vector<bool> seen(L.perm.size(), false);
    for (auto p : L.perm) {
      require(p < L.perm.size() && !seen[p], at + ".perm is not a permutation");
      seen[p] = true;
    }
    for (double s : L.scale) {
      switch (t.domain) {
        case ScaleDomain::Identity: require(s == 1.0, at + ".scale must be 1 in identity domain"); break;
        case ScaleDomain::SignFlip: require(s == 1.0 || s == -1.0, at + ".scale must be +-1"); break;
        case ScaleDomain::Positive:
          require(std::isfinite(s) && s > 0.0, at + ".scale must be positive");
          break;
      }
    }
  }
}

Network apply(const NetworkTransform& t, const Network& net) {
  validate(net);
  validate(t, net.arch());
  check_domain(t.domain, net.hidden);
  Network out = net;
  const std::size_t L = net.layers.size();
  for (std::size_t l = 0; l < L; ++l) {
    const DenseLayer& src = net.layers[l];
    DenseLayer& dst = out.layers[l];
    const LayerTransform* row_t = l + 1 < L ? &t.layers[l] : nullptr;  // output side
    const LayerTransform* col_t = l > 0 ? &t.layers[l - 1] : nullptr;  // input side
    for (std::size_t i = 0; i < src.out; ++i) {
      const std::size_t si = row_t ? row_t->perm[i] : i;
      const double qi = row_t ? row_t->scale[i] : 1.0;
      for (std::size_t k = 0; k < src.in; ++k) {
        const std::size_t sk = col_t ? col_t->perm[k] : k;
        const double qk = col_t ? col_t->scale[k] : 1.0;
        dst.w(i, k) = qi * src.w(si, sk) / qk;
      }
      dst.bias[i] = qi * src.bias[si];
    }
  }
  return out;
}

NetworkTransform sample_transform(const Arch& arch, ScaleDomain domain, bool include_perm,
                                  bool include_scale, std::uint64_t seed) {
  Pcg32 rng(seed);
  NetworkTransform t = NetworkTransform::identity(arch, domain);
  const double lo = std::log(0.25), hi = std::log(4.0);
  for (auto& L : t.layers) {
    if (include_perm) {
      auto p = rng.permutation(L.width());
      std::copy(p.begin(), p.end(), L.perm.begin());
    }
    if (include_scale) {
      for (auto& s : L.scale) {
        if (domain == ScaleDomain::SignFlip) s = rng.coin() ? -1.0 : 1.0;
        if (domain == ScaleDomain::Positive) s = std::exp(rng.uniform(lo, hi));
      }
    }
  }
  return t;
}

NetworkTransform compose(const NetworkTransform& g, const NetworkTransform& h) {
  require(g.domain == h.domain, "compose: scale domains differ");
  require(g.layers.size() == h.layers.size(), "compose: transforms have different depth");
  NetworkTransform out;
  out.domain = g.domain;
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    const auto& G = g.layers[l];
    const auto& H = h.layers[l];
    require(G.width() == H.width(), "compose: width mismatch at layer " + std::to_string(l));
    LayerTransform c;
    c.perm.resize(G.width());
    c.scale.resize(G.width());
    for (std::size_t i = 0; i < G.width(); ++i) {
      c.perm[i] = H.perm[G.perm[i]];
      c.scale[i] = G.scale[i] * H.scale[G.perm[i]];
    }
    out.layers.push_back(std::move(c));
  }
  return out;
}

NetworkTransform invert(const NetworkTransform& g) {
  NetworkTransform out;
  out.domain = g.domain;
  for (const auto& G : g.layers) {
    LayerTransform inv;
    inv.perm.resize(G.width());
    inv.scale.resize(G.width());
    for (std::size_t i = 0; i < G.width(); ++i) {
      inv.perm[G.perm[i]] = i;
      inv.scale[G.perm[i]] = 1.0 / G.scale[i];
    }
    out.layers.push_back(std::move(inv));
  }
  return out;
}

Network perturb(const Network& net, double sigma, std::uint64_t seed) {
  require(sigma >= 0.0, "perturb: sigma must be >= 0");
  validate(net);
  Network out = net;
  if (sigma == 0.0) return out;
  Pcg32 rng(seed);
  for (auto& L : out.layers) {
    double mean = 0.0;
    for (double w : L.weight) mean += w;
    mean /= static_cast<double>(L.weight.size());
    double var = 0.0;
    for (double w : L.weight) var += (w - mean) * (w - mean);
    const double sd = sigma * std::sqrt(var / static_cast<double>(L.weight.size()));
    for (auto& w : L.weight) w += sd * rng.normal();
    for (auto& b : L.bias) b += sd * rng.normal();
  }
  return out;
}

Json transform_to_json(const NetworkTransform& t) {
  Json layers = Json::array();
  for (const auto& L : t.layers) layers.push_back({{"perm", L.perm}, {"scale", L.scale}});
  return {{"domain", domain_name(t.domain)}, {"layers", std::move(layers)}};
}

NetworkTransform transform_from_json(const Json& j) {
  require(j.is_object() && j.contains("domain") && j.contains("layers"),
          "transform: expected object with domain and layers");
  NetworkTransform t;
  t.domain = parse_domain(j.at("domain").get<std::string>());
  for (const auto& L : j.at("layers")) {
    LayerTransform lt;
    lt.perm = L.at("perm").get<std::vector<std::size_t>>();
    lt.scale = L.at("scale").get<std::vector<double>>();
    require(lt.perm.size() == lt.scale.size(), "transform: perm/scale length mismatch");
    t.layers.push_back(std::move(lt));
  }
  return t;
}

}  // namespace symcanon
