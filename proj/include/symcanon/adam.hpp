#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "symcanon/tape.hpp"
#include "symcanon/tensor.hpp"

namespace symcanon {

// Ordered collection of named trainable tensors. Names are module paths
// ("encoder.iter0.msg.rho.l1.w") and double as checkpoint keys.
class ParamSet {
 public:
  std::size_t add(std::string name, Tensor value);
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const;

  Tensor& at(const std::string& name) { return values_[index(name)]; }
  const Tensor& at(const std::string& name) const { return values_[index(name)]; }

  std::size_t size() const { return values_.size(); }
  std::size_t numel() const;
  const std::vector<std::string>& names() const { return names_; }
  std::vector<Tensor>& values() { return values_; }
  const std::vector<Tensor>& values() const { return values_; }

  // Records every tensor as a leaf; requires_grad=false binds them as constants.
  std::vector<Var> bind(Tape& tape, bool requires_grad) const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::size_t warmup_steps = 0;
};

// AdamW with linear warmup: lr_t = lr * min(1, t / warmup_steps), decay
// applied directly to the weights (decoupled from the gradient moments).
class Adam {
 public:
  Adam(AdamConfig config, const ParamSet& params);

  // Throws if any gradient entry is non-finite, naming the parameter.
  void step(ParamSet& params, const std::vector<Tensor>& grads);

  double effective_lr() const;
  std::size_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::size_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace symcanon
