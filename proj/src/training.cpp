#include "symcanon/training.hpp"

#include <cmath>
#include <numbers>

#include "symcanon/error.hpp"
#include "symcanon/rng.hpp"

namespace symcanon {

namespace {

ParamSet params_from(const Network& net) {
  ParamSet ps;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& L = net.layers[l];
    ps.add("l" + std::to_string(l) + ".w", Tensor({L.out, L.in}, L.weight));
    ps.add("l" + std::to_string(l) + ".b", Tensor({1, L.out}, L.bias));
  }
  return ps;
}

Network network_from(const ParamSet& ps, const Network& like) {
  Network net = like;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    net.layers[l].weight = ps.values()[2 * l].data();
    net.layers[l].bias = ps.values()[2 * l + 1].data();
  }
  return net;
}

// Reusable full-batch training tape: parameters are leaves, loss is the last node.
struct FitTape {
  Tape tape;
  std::vector<Var> params;
  Var loss;
};

template <class LossBuilder>
FitResult fit(Network init, const std::vector<bool>& trainable, std::size_t steps,
              const AdamConfig& adam_cfg, LossBuilder build_loss) {
  ParamSet ps = params_from(init);
  FitTape ft;
  for (std::size_t k = 0; k < ps.size(); ++k)
    ft.params.push_back(ft.tape.leaf(ps.values()[k], trainable[k]));
  std::vector<Var> ws, bs;
  for (std::size_t l = 0; l < init.layers.size(); ++l) {
    ws.push_back(ft.params[2 * l]);
    bs.push_back(ft.params[2 * l + 1]);
  }
  ft.loss = build_loss(ft.tape, ws, bs, init.hidden);

  Adam adam(adam_cfg, ps);
  FitResult res;
  res.loss_history.reserve(steps);
  std::vector<Tensor> grads(ps.size());
  for (std::size_t step = 0; step < steps; ++step) {
    if (step > 0) {
      for (std::size_t k = 0; k < ps.size(); ++k) ft.tape.set_leaf(ft.params[k], ps.values()[k]);
      ft.tape.forward();
    }
    const double loss = ft.tape.value(ft.loss).item();
    require(std::isfinite(loss), "training diverged: non-finite loss at step " + std::to_string(step));
    res.loss_history.push_back(loss);
    ft.tape.backward(ft.loss);
    for (std::size_t k = 0; k < ps.size(); ++k) {
      grads[k] = trainable[k] ? ft.tape.grad(ft.params[k]) : Tensor(ps.values()[k].shape(), 0.0);
    }
    adam.step(ps, grads);
  }
  for (std::size_t k = 0; k < ps.size(); ++k) ft.tape.set_leaf(ft.params[k], ps.values()[k]);
  ft.tape.forward();
  res.final_loss = ft.tape.value(ft.loss).item();
  require(std::isfinite(res.final_loss), "training diverged: non-finite final loss");
  res.net = network_from(ps, init);
  return res;
}

}  // namespace

double inr_mse(const Network& net, const Image& target) {
  return image_mse(render_inr(net, target.height, target.width), target);
}

FitResult train_inr(const Image& image, const InrTrainConfig& config, std::uint64_t seed) {
  require(config.arch.widths.size() >= 2 && config.arch.widths.front() == 2 &&
              config.arch.widths.back() == 1,
          "train_inr: architecture must map 2 -> 1, got " + config.arch.str());
  require(image.pixels.size() == image.height * image.width && !image.pixels.empty(),
          "train_inr: malformed image");
  Network init = config.bias_only ? zeros_like(config.arch, Activation::sine(config.omega))
                                  : init_siren(config.arch, config.omega, seed);
  std::vector<bool> trainable;
  for (std::size_t l = 0; l < init.layers.size(); ++l) {
    trainable.push_back(!config.bias_only);
    trainable.push_back(true);
  }
  const Tensor grid = coord_grid(image.height, image.width);
  const Tensor target({image.pixels.size(), 1}, image.pixels);
  return fit(std::move(init), trainable, config.steps, config.adam,
             [&](Tape& t, std::span<const Var> ws, std::span<const Var> bs, const Activation& act) {
               Var x = t.constant(grid);
               Var out = forward_on_tape(t, ws, bs, act, x);
               Var d = t.sub(out, t.constant(target));
               return t.mean(t.mul(d, d));
             });
}

ClsData synth_blobs(std::size_t n_samples, std::size_t n_classes, std::size_t dim,
                    std::uint64_t seed) {
  require(n_classes >= 2 && dim >= 1 && n_samples >= 1, "synth_blobs: bad sizes");
  Pcg32 rng(seed);
  std::vector<std::vector<double>> centers(n_classes, std::vector<double>(dim));
  for (auto& c : centers) {
    double norm = 0.0;
    for (auto& v : c) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : c) v = 2.0 * v / (norm > 0 ? norm : 1.0);
  }
  ClsData d;
  d.n_classes = n_classes;
  d.x = Tensor::matrix(n_samples, dim);
  for (std::size_t i = 0; i < n_samples; ++i) {
    int label = static_cast<int>(rng.below(static_cast<std::uint32_t>(n_classes)));
    d.labels.push_back(label);
    for (std::size_t k = 0; k < dim; ++k) d.x(i, k) = centers[label][k] + 0.7 * rng.normal();
  }
  return d;
}

ClsMetrics evaluate_classifier(const Network& net, const ClsData& data) {
  require(net.output_dim() == data.n_classes && net.input_dim() == data.x.cols(),
          "evaluate_classifier: network " + net.arch().str() + " does not fit data");
  Tensor logits = forward(net, data.x);
  ClsMetrics m;
  const std::size_t C = data.n_classes;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    double mx = logits(i, 0);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < C; ++c) {
      if (logits(i, c) > mx) {
        mx = logits(i, c);
        arg = c;
      }
    }
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(logits(i, c) - mx);
    m.cross_entropy += -(logits(i, static_cast<std::size_t>(data.labels[i])) - mx - std::log(z));
    m.accuracy += arg == static_cast<std::size_t>(data.labels[i]) ? 1.0 : 0.0;
  }
  m.cross_entropy /= static_cast<double>(data.labels.size());
  m.accuracy /= static_cast<double>(data.labels.size());
  return m;
}

FitResult train_classifier(const ClsData& data, const ClsTrainConfig& config, std::uint64_t seed) {
  require(config.arch.widths.front() == data.x.cols() &&
              config.arch.widths.back() == data.n_classes,
          "train_classifier: architecture " + config.arch.str() + " does not fit data");
  Network init = init_mlp(config.arch, config.hidden, seed);
  std::vector<bool> trainable(2 * init.layers.size(), true);
  Tensor onehot = Tensor::matrix(data.labels.size(), data.n_classes);
  for (std::size_t i = 0; i < data.labels.size(); ++i)
    onehot(i, static_cast<std::size_t>(data.labels[i])) = 1.0;
  const double inv_n = 1.0 / static_cast<double>(data.labels.size());
  return fit(std::move(init), trainable, config.steps, config.adam,
             [&](Tape& t, std::span<const Var> ws, std::span<const Var> bs, const Activation& act) {
               Var logits = forward_on_tape(t, ws, bs, act, t.constant(data.x));
               Var lp = t.log_softmax_rows(logits);
               return t.scale(t.sum(t.mul(lp, t.constant(onehot))), -inv_n);
             });
}

}  // namespace symcanon
