#include "symcanon/adam.hpp"

#include <algorithm>
#include <cmath>

#include "symcanon/error.hpp"

namespace symcanon {

std::size_t ParamSet::add(std::string name, Tensor value) {
  require(!contains(name), "duplicate parameter name " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::size_t ParamSet::index(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  require(it != names_.end(), "unknown parameter " + name);
  return static_cast<std::size_t>(it - names_.begin());
}

bool ParamSet::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ParamSet::numel() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

std::vector<Var> ParamSet::bind(Tape& tape, bool requires_grad) const {
  std::vector<Var> vars;
  vars.reserve(values_.size());
  for (const auto& v : values_) vars.push_back(tape.leaf(v, requires_grad));
  return vars;
}

Adam::Adam(AdamConfig config, const ParamSet& params) : config_(config) {
  require(config_.beta1 >= 0.0 && config_.beta1 < 1.0, "adam beta1 must be in [0, 1)");
  require(config_.beta2 >= 0.0 && config_.beta2 < 1.0, "adam beta2 must be in [0, 1)");
  for (const auto& p : params.values()) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

double Adam::effective_lr() const {
  if (config_.warmup_steps == 0) return config_.lr;
  double frac = static_cast<double>(step_) / static_cast<double>(config_.warmup_steps);
  return config_.lr * std::min(1.0, frac);
}

void Adam::step(ParamSet& params, const std::vector<Tensor>& grads) {
  require(grads.size() == params.size() && m_.size() == params.size(),
          "adam: parameter/gradient count mismatch");
  for (std::size_t k = 0; k < grads.size(); ++k) {
    require(grads[k].same_shape(params.values()[k]),
            "adam: gradient shape mismatch for " + params.names()[k]);
    for (double g : grads[k].data())
      require(std::isfinite(g), "adam: non-finite gradient in parameter " + params.names()[k]);
  }

  ++step_;
  const double lr = effective_lr();
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t k = 0; k < grads.size(); ++k) {
    auto& p = params.values()[k].data();
    auto& m = m_[k].data();
    auto& v = v_[k].data();
    const auto& g = grads[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr * config_.weight_decay * p[i];
      p[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace symcanon
