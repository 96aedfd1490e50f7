#include "symcanon/autoencoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "symcanon/error.hpp"
#include "symcanon/parallel.hpp"
#include "symcanon/rng.hpp"
#include "symcanon/training.hpp"

namespace symcanon {

std::string task_name(AeTask t) { return t == AeTask::Inr ? "inr" : "cls"; }

AeTask parse_task(const std::string& name) {
  if (name == "inr") return AeTask::Inr;
  if (name == "cls") return AeTask::Cls;
  throw Error("unknown task '" + name + "' (expected inr or cls)");
}

void validate(const AeConfig& c) {
  require(c.target_arch.depth() >= 1, "autoencoder: target architecture needs a layer");
  require(c.temperature > 0.0, "autoencoder: temperature must be > 0");
  require(c.batch_size >= 1, "autoencoder: batch_size must be >= 1");
  require(c.val_fraction >= 0.0 && c.val_fraction < 1.0,
          "autoencoder: val_fraction must be in [0, 1)");
  require(c.encoder_lr_scale > 0.0 && std::isfinite(c.encoder_lr_scale),
          "autoencoder: encoder_lr_scale must be positive");
  require(!c.decoder_hidden.empty(), "autoencoder: decoder needs at least one hidden layer");
  if (c.task == AeTask::Inr) {
    require(c.target_arch.widths.front() == 2 && c.target_arch.widths.back() == 1,
            "autoencoder: INR target must map 2 -> 1, got " + c.target_arch.str());
    require(c.grid_size >= 1, "autoencoder: grid_size must be >= 1");
  } else {
    require(c.probe_samples >= 1, "autoencoder: probe_samples must be >= 1");
  }
  check_variant(c.encoder.variant, c.target_activation);
}

// ---------------------------------------------------------------------------
// Config serialisation.

namespace {

Json gmn_to_json(const GmnConfig& g) {
  return {{"variant", variant_name(g.variant)}, {"hidden_dim", g.hidden_dim},
          {"n_iterations", g.n_iterations},     {"latent_dim", g.latent_dim},
          {"max_depth", g.max_depth},           {"readout", readout_name(g.readout)}};
}

GmnConfig gmn_from_json(const Json& j) {
  GmnConfig g;
  g.variant = parse_variant(j.at("variant").get<std::string>());
  g.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  g.n_iterations = j.at("n_iterations").get<std::size_t>();
  g.latent_dim = j.at("latent_dim").get<std::size_t>();
  g.max_depth = j.at("max_depth").get<std::size_t>();
  g.readout = parse_readout(j.at("readout").get<std::string>());
  return g;
}

}  // namespace

Json ae_config_to_json(const AeConfig& c) {
  return {{"task", task_name(c.task)},
          {"encoder", gmn_to_json(c.encoder)},
          {"decoder_hidden", c.decoder_hidden},
          {"decoder_activation", "silu"},
          {"target_arch", c.target_arch.str()},
          {"target_activation", activation_to_json(c.target_activation)},
          {"lr", c.adam.lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"eps", c.adam.eps},
          {"weight_decay", c.adam.weight_decay},
          {"warmup_steps", c.adam.warmup_steps},
          {"encoder_lr_scale", c.encoder_lr_scale},
          {"temperature", c.temperature},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"val_fraction", c.val_fraction},
          {"grid_size", c.grid_size},
          {"probe_samples", c.probe_samples},
          {"seed", c.seed}};
}

AeConfig ae_config_from_json(const Json& j) {
  try {
    AeConfig c;
    c.task = parse_task(j.at("task").get<std::string>());
    c.encoder = gmn_from_json(j.at("encoder"));
    c.decoder_hidden = j.at("decoder_hidden").get<std::vector<std::size_t>>();
    require(j.at("decoder_activation").get<std::string>() == "silu",
            "only the silu decoder activation is supported");
    c.target_arch = parse_arch(j.at("target_arch").get<std::string>());
    c.target_activation = activation_from_json(j.at("target_activation"), "$.target_activation");
    c.adam.lr = j.at("lr").get<double>();
    c.adam.beta1 = j.at("beta1").get<double>();
    c.adam.beta2 = j.at("beta2").get<double>();
    c.adam.eps = j.at("eps").get<double>();
    c.adam.weight_decay = j.at("weight_decay").get<double>();
    c.adam.warmup_steps = j.at("warmup_steps").get<std::size_t>();
    c.encoder_lr_scale = j.at("encoder_lr_scale").get<double>();
    c.temperature = j.at("temperature").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.val_fraction = j.at("val_fraction").get<double>();
    c.grid_size = j.at("grid_size").get<std::size_t>();
    c.probe_samples = j.at("probe_samples").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  } catch (const Json::exception& e) {
    throw Error(std::string("autoencoder config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Model.

namespace {

Network reference_draw(const AeConfig& c, std::uint64_t seed) {
  if (c.target_activation.kind == ActKind::Sine)
    return init_siren(c.target_arch, c.target_activation.omega, seed);
  return init_mlp(c.target_arch, c.target_activation, seed);
}

std::string dec_name(std::size_t k, const char* what) {
  return "decoder.l" + std::to_string(k) + "." + what;
}

}  // namespace

AeModel init_ae(const AeConfig& config) {
  validate(config);
  AeModel m;
  m.config = config;
  m.encoder = init_gmn(config.encoder, mix_seed(config.seed, 1));

  Pcg32 rng(mix_seed(config.seed, 2));
  std::vector<std::size_t> dims{config.encoder.latent_dim};
  dims.insert(dims.end(), config.decoder_hidden.begin(), config.decoder_hidden.end());
  const std::size_t P = config.target_arch.param_count();
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[k]));
    Tensor w = Tensor::matrix(dims[k], dims[k + 1]);
    Tensor b = Tensor::matrix(1, dims[k + 1]);
    for (auto& v : w.data()) v = rng.uniform(-bound, bound);
    for (auto& v : b.data()) v = rng.uniform(-bound, bound);
    m.decoder.add(dec_name(k, "w"), std::move(w));
    m.decoder.add(dec_name(k, "b"), std::move(b));
  }

  // Output layer works in units of each parameter block's RMS: the bias is a
  // fresh target-architecture draw divided by that RMS.
  const Network ref = reference_draw(config, mix_seed(config.seed, 3));
  std::vector<double> flat = flatten(ref);
  std::vector<double>& block_scale = m.output_scale;
  block_scale.assign(P, 1.0);
  std::size_t off = 0;
  for (const auto& L : ref.layers) {
    for (const auto* block : {&L.weight, &L.bias}) {
      double ss = 0.0;
      for (double v : *block) ss += v * v;
      double rms = std::sqrt(ss / static_cast<double>(block->size()));
      if (!(rms > 0.0)) rms = 1.0;
      for (std::size_t i = 0; i < block->size(); ++i) block_scale[off + i] = rms;
      off += block->size();
    }
  }
  // A small output layer keeps every decoded net near the bias at the start.
  const std::size_t in = dims.back();
  const double bound = 0.1 / std::sqrt(static_cast<double>(in));
  Tensor w = Tensor::matrix(in, P);
  for (std::size_t r = 0; r < in; ++r)
    for (std::size_t p = 0; p < P; ++p) w(r, p) = rng.uniform(-bound, bound);
  for (std::size_t p = 0; p < P; ++p) flat[p] /= block_scale[p];
  const std::size_t last = dims.size() - 1;
  m.decoder.add(dec_name(last, "w"), std::move(w));
  m.decoder.add(dec_name(last, "b"), Tensor({1, P}, flat));
  return m;
}

Tensor encode_latent(const Network& net, const AeModel& model) {
  require(net.arch() == model.config.target_arch, "autoencoder: network " + net.arch().str() +
                                                      " does not match target " +
                                                      model.config.target_arch.str());
  return encode(net, model.encoder);
}

Var decode_on_tape(Tape& tape, const BoundParams& dec, const AeModel& model, Var z) {
  const std::size_t n_layers = model.config.decoder_hidden.size() + 1;
  Var h = z;
  for (std::size_t k = 0; k < n_layers; ++k) {
    h = tape.add(tape.matmul(h, dec[dec_name(k, "w")]), dec[dec_name(k, "b")]);
    if (k + 1 < n_layers) h = tape.silu(h);
  }
  return tape.mul(h, tape.constant(Tensor({1, model.output_scale.size()}, model.output_scale)));
}

Network decode(const Tensor& z, const AeModel& model) {
  require(z.size() == model.config.encoder.latent_dim,
          "decode: latent has " + std::to_string(z.size()) + " entries, expected " +
              std::to_string(model.config.encoder.latent_dim));
  Tape tape;
  BoundParams dec(tape, model.decoder, false);
  Var zv = tape.constant(Tensor({1, z.size()}, z.data()));
  const Tensor& flat = tape.value(decode_on_tape(tape, dec, model, zv));
  return unflatten(flat.data(), model.config.target_arch, model.config.target_activation);
}

Network canonicalize(const Network& net, const AeModel& model) {
  return decode(encode_latent(net, model), model);
}

// ---------------------------------------------------------------------------
// Functional losses.

double loss_inr(const Network& decoded, const Network& source, const Tensor& grid) {
  require(decoded.input_dim() == 2 && decoded.output_dim() == 1 && source.input_dim() == 2 &&
              source.output_dim() == 1,
          "loss_inr: both networks must map 2 -> 1");
  const Tensor a = forward(decoded, grid);
  const Tensor b = forward(source, grid);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

namespace {

// Row-wise softmax(x / tau) and its log.
void tempered_softmax(const Tensor& logits, double tau, Tensor& p, Tensor& logp) {
  p = Tensor::matrix(logits.rows(), logits.cols());
  logp = p;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < logits.cols(); ++c) mx = std::max(mx, logits(r, c) / tau);
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) z += std::exp(logits(r, c) / tau - mx);
    const double lz = mx + std::log(z);
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      logp(r, c) = logits(r, c) / tau - lz;
      p(r, c) = std::exp(logp(r, c));
    }
  }
}

void require_finite(const Tensor& t, const char* what) {
  for (double v : t.data())
    require(std::isfinite(v), std::string("loss_cls: non-finite ") + what + " logits");
}

}  // namespace

double loss_cls(const Network& decoded, const Network& source, const Tensor& probe, double tau) {
  require(tau > 0.0, "loss_cls: temperature must be > 0");
  require(decoded.output_dim() == source.output_dim(), "loss_cls: output dimensions differ");
  const Tensor ls = forward(source, probe);
  const Tensor ld = forward(decoded, probe);
  require_finite(ls, "source");
  require_finite(ld, "decoded");
  Tensor ps, lps, pd, lpd;
  tempered_softmax(ls, tau, ps, lps);
  tempered_softmax(ld, tau, pd, lpd);
  double kl = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) kl += ps[i] * (lps[i] - lpd[i]);
  return kl / static_cast<double>(ls.rows());
}

Tensor loss_inputs(const AeConfig& config) {
  if (config.task == AeTask::Inr) return coord_grid(config.grid_size, config.grid_size);
  return synth_blobs(config.probe_samples, config.target_arch.widths.back(),
                     config.target_arch.widths.front(), mix_seed(config.seed, 4))
      .x;
}

double reconstruction_loss(const Network& source, const AeModel& model, const Tensor& inputs) {
  const Network rec = canonicalize(source, model);
  if (model.config.task == AeTask::Inr) return loss_inr(rec, source, inputs);
  return loss_cls(rec, source, inputs, model.config.temperature);
}

// ---------------------------------------------------------------------------
// Training.

namespace {

// Functional loss of decode(encode(source)) on a tape, with target outputs
// held constant.
Var functional_loss_on_tape(Tape& tape, const AeModel& model, Var flat, const Network& source,
                            const Tensor& inputs) {
  const Arch& arch = model.config.target_arch;
  std::vector<Var> ws, bs;
  std::size_t off = 0;
  for (std::size_t l = 0; l < arch.depth(); ++l) {
    const std::size_t in = arch.widths[l], out = arch.widths[l + 1];
    ws.push_back(tape.view(flat, off, {out, in}));
    off += in * out;
    bs.push_back(tape.view(flat, off, {1, out}));
    off += out;
  }
  Var x = tape.constant(inputs);
  Var pred = forward_on_tape(tape, ws, bs, model.config.target_activation, x);
  const Tensor target = forward(source, inputs);
  if (model.config.task == AeTask::Inr) {
    Var d = tape.sub(pred, tape.constant(target));
    return tape.mean(tape.mul(d, d));
  }
  const double tau = model.config.temperature;
  Tensor ps, lps;
  tempered_softmax(target, tau, ps, lps);
  double neg_entropy = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) neg_entropy += ps[i] * lps[i];
  const double inv_b = 1.0 / static_cast<double>(target.rows());
  Var lq = tape.log_softmax_rows(tape.scale(pred, 1.0 / tau));
  Var cross = tape.scale(tape.sum(tape.mul(tape.constant(ps), lq)), -inv_b);
  return tape.add(cross, tape.constant(Tensor::scalar(neg_entropy * inv_b)));
}

AeGradient sample_grad(const AeModel& model, const Network& source, const NetGraph& graph,
                       const Tensor& inputs) {
  Tape tape;
  BoundParams enc(tape, model.encoder.params, true);
  BoundParams dec(tape, model.decoder, true);
  Var z = encode_on_tape(tape, enc, model.encoder.config, graph);
  Var flat = decode_on_tape(tape, dec, model, z);
  Var loss = functional_loss_on_tape(tape, model, flat, source, inputs);
  tape.backward(loss);
  AeGradient g;
  g.loss = tape.value(loss).item();
  for (Var v : enc.vars()) g.encoder.push_back(tape.grad(v));
  for (Var v : dec.vars()) g.decoder.push_back(tape.grad(v));
  return g;
}

double mean_loss(const AeModel& model, const std::vector<Network>& data,
                 const std::vector<std::size_t>& ids, const Tensor& inputs, std::size_t jobs) {
  if (ids.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> losses(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t k) {
    losses[k] = reconstruction_loss(data[ids[k]], model, inputs);
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(ids.size());
}

}  // namespace

AeGradient ae_gradient(const AeModel& model, const Network& source, const Tensor& inputs) {
  require(source.arch() == model.config.target_arch, "ae_gradient: architecture mismatch");
  return sample_grad(model, source, to_graph(source), inputs);
}

void standardize_latent(AeModel& model, const std::vector<Network>& nets) {
  require(!nets.empty(), "standardize_latent: no networks");
  std::vector<Tensor> zs(nets.size());
  parallel_for(nets.size(), model.config.jobs,
               [&](std::size_t i) { zs[i] = encode_latent(nets[i], model); });
  const std::size_t d = model.config.encoder.latent_dim;
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  const double n = static_cast<double>(nets.size());
  for (const Tensor& z : zs)
    for (std::size_t k = 0; k < d; ++k) mean[k] += z[k] / n;
  for (const Tensor& z : zs)
    for (std::size_t k = 0; k < d; ++k) sd[k] += (z[k] - mean[k]) * (z[k] - mean[k]) / n;
  Tensor& w = model.decoder.at(dec_name(0, "w"));
  Tensor& b = model.decoder.at(dec_name(0, "b"));
  for (std::size_t k = 0; k < d; ++k) {
    sd[k] = std::sqrt(sd[k]);
    // A constant latent dimension is only centred.
    if (!(sd[k] > 1e-12 * (std::abs(mean[k]) + 1.0))) sd[k] = 1.0;
    for (std::size_t j = 0; j < w.cols(); ++j) {
      w(k, j) /= sd[k];
      b[j] -= mean[k] * w(k, j);
    }
  }
}

void standardize_output(AeModel& model, const std::vector<Network>& nets) {
  require(!nets.empty(), "standardize_output: no networks");
  const std::size_t P = model.config.target_arch.param_count();
  std::vector<double> mean(P, 0.0), sd(P, 0.0);
  const double n = static_cast<double>(nets.size());
  std::vector<std::vector<double>> flats;
  for (const Network& net : nets) {
    require(net.arch() == model.config.target_arch, "standardize_output: architecture mismatch");
    flats.push_back(flatten(net));
  }
  for (const auto& f : flats)
    for (std::size_t p = 0; p < P; ++p) mean[p] += f[p] / n;
  for (const auto& f : flats)
    for (std::size_t p = 0; p < P; ++p) sd[p] += (f[p] - mean[p]) * (f[p] - mean[p]) / n;
  double mean_sd = 0.0;
  for (double& v : sd) {
    v = std::sqrt(v);
    mean_sd += v / static_cast<double>(P);
  }
  // Parameters that barely vary across the zoo keep a usable step size; a
  // zoo with no spread at all keeps the current units.
  if (mean_sd > 0.0) {
    for (double& v : sd) v = std::max(v, 1e-2 * mean_sd);
  } else {
    sd = model.output_scale;
  }

  // Last-layer weights are reused as drawn, now in units of the spread.
  Tensor& b = model.decoder.at(dec_name(model.config.decoder_hidden.size(), "b"));
  for (std::size_t p = 0; p < P; ++p) b[p] = mean[p] / sd[p];
  model.output_scale = sd;
}

AeTrainResult train_ae(const std::vector<Network>& dataset, const AeConfig& config) {
  validate(config);
  require(!dataset.empty(), "train_ae: empty dataset");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    require(dataset[i].arch() == config.target_arch,
            "train_ae: network " + std::to_string(i) + " has architecture " +
                dataset[i].arch().str() + ", expected " + config.target_arch.str());
    require(dataset[i].hidden == config.target_activation,
            "train_ae: network " + std::to_string(i) + " has a different activation");
  }

  AeTrainResult res;
  res.model = init_ae(config);
  AeModel& model = res.model;
  const Tensor inputs = loss_inputs(config);

  Pcg32 split_rng(mix_seed(config.seed, 5));
  std::vector<std::size_t> order = split_rng.permutation(dataset.size());
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(config.val_fraction * static_cast<double>(dataset.size())));
  if (config.val_fraction > 0.0 && dataset.size() >= 2) n_val = std::max<std::size_t>(n_val, 1);
  n_val = std::min(n_val, dataset.size() - 1);
  res.val_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  res.train_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  // A single-split dataset selects on training loss.
  const std::vector<std::size_t>& select_ids = res.val_ids.empty() ? res.train_ids : res.val_ids;

  std::vector<NetGraph> graphs(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) graphs[i] = to_graph(dataset[i]);

  std::vector<Network> train_nets;
  for (std::size_t id : res.train_ids) train_nets.push_back(dataset[id]);
  standardize_latent(model, train_nets);
  standardize_output(model, train_nets);

  AdamConfig enc_adam = config.adam;
  enc_adam.lr *= config.encoder_lr_scale;
  Adam enc_opt(enc_adam, model.encoder.params);
  Adam dec_opt(config.adam, model.decoder);

  auto check = [](double v, std::size_t epoch) {
    if (!std::isfinite(v))
      throw Error("autoencoder training diverged at epoch " + std::to_string(epoch));
  };

  AeEpoch e0{0, mean_loss(model, dataset, res.train_ids, inputs, config.jobs),
             mean_loss(model, dataset, res.val_ids, inputs, config.jobs)};
  check(e0.train_loss, 0);
  res.history.push_back(e0);
  double best = mean_loss(model, dataset, select_ids, inputs, config.jobs);
  AeModel best_model = model;

  Pcg32 shuffle_rng(mix_seed(config.seed, 6));
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> ids = res.train_ids;
    shuffle_rng.shuffle(ids);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < ids.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, ids.size() - start);
      std::vector<AeGradient> grads(n);
      parallel_for(n, config.jobs, [&](std::size_t k) {
        const std::size_t id = ids[start + k];
        grads[k] = sample_grad(model, dataset[id], graphs[id], inputs);
      });
      // Ordered reduction keeps results independent of the job count.
      std::vector<Tensor> enc_g = grads[0].encoder, dec_g = grads[0].decoder;
      double batch_loss = grads[0].loss;
      for (std::size_t k = 1; k < n; ++k) {
        batch_loss += grads[k].loss;
        for (std::size_t p = 0; p < enc_g.size(); ++p)
          for (std::size_t i = 0; i < enc_g[p].size(); ++i) enc_g[p][i] += grads[k].encoder[p][i];
        for (std::size_t p = 0; p < dec_g.size(); ++p)
          for (std::size_t i = 0; i < dec_g[p].size(); ++i) dec_g[p][i] += grads[k].decoder[p][i];
      }
      check(batch_loss, epoch);
      const double inv = 1.0 / static_cast<double>(n);
      for (auto& t : enc_g)
        for (auto& v : t.data()) v *= inv;
      for (auto& t : dec_g)
        for (auto& v : t.data()) v *= inv;
      enc_opt.step(model.encoder.params, enc_g);
      dec_opt.step(model.decoder, dec_g);
      loss_sum += batch_loss;
    }
    AeEpoch row{epoch, loss_sum / static_cast<double>(ids.size()),
                mean_loss(model, dataset, res.val_ids, inputs, config.jobs)};
    check(row.train_loss, epoch);
    res.history.push_back(row);
    const double score = res.val_ids.empty() ? row.train_loss : row.val_loss;
    check(score, epoch);
    if (score < best) {
      best = score;
      best_model = model;
      res.best_epoch = epoch;
    }
  }
  res.model = std::move(best_model);
  return res;
}

BarrierCurve latent_interpolate(const Network& a, const Network& b, const AeModel& model,
                                const NetLossFn& loss_fn, std::size_t n_points) {
  const Tensor za = encode_latent(a, model);
  const Tensor zb = encode_latent(b, model);
  return sample_curve(n_points, [&](double g) {
    if (g == 1.0) return loss_fn(decode(za, model));
    if (g == 0.0) return loss_fn(decode(zb, model));
    Tensor z = za;
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = g * za[i] + (1.0 - g) * zb[i];
    return loss_fn(decode(z, model));
  });
}

std::string history_to_csv(const std::vector<AeEpoch>& history) {
  std::string out = "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const auto& e : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", e.epoch, e.train_loss, e.val_loss);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint.

namespace {

constexpr char kAeMagic[8] = {'S', 'Y', 'M', 'C', 'A', 'E', '0', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

void put_f32(std::string& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f32(const std::string& in, std::size_t pos) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i)
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void save_ae(const AeModel& model, const std::string& path, const Json& meta) {
  Json tensors = Json::array();
  std::string blob;
  std::size_t offset = 0;
  auto emit = [&](const std::string& prefix, const ParamSet& ps) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const Tensor& t = ps.values()[i];
      tensors.push_back({{"name", prefix + ps.names()[i]}, {"shape", t.shape()}, {"offset", offset}});
      for (double v : t.data()) put_f32(blob, v);
      offset += t.size();
    }
  };
  emit("encoder.", model.encoder.params);
  emit("", model.decoder);
  const std::size_t P = model.output_scale.size();
  tensors.push_back({{"name", "output_scale"}, {"shape", {1, P}}, {"offset", offset}});
  for (double v : model.output_scale) put_f32(blob, v);
  Json header = {{"version", 1},
                 {"config", ae_config_to_json(model.config)},
                 {"tensors", tensors},
                 {"meta", meta}};
  const std::string hs = header.dump();
  std::string out(kAeMagic, 8);
  put_u64(out, hs.size());
  out += hs;
  out += blob;
  write_text_file(out, path);
}

AeModel load_ae(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), "cannot open autoencoder checkpoint " + path);
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  require(in.size() >= 16 && std::memcmp(in.data(), kAeMagic, 8) == 0,
          "autoencoder checkpoint " + path + ": bad magic");
  const std::uint64_t hlen = get_u64(in, 8);
  require(hlen <= in.size() - 16, "autoencoder checkpoint " + path + ": truncated header");
  Json header;
  try {
    header = Json::parse(in.substr(16, hlen));
  } catch (const Json::exception& e) {
    throw Error("autoencoder checkpoint " + path + ": " + e.what());
  }
  require(header.value("version", 0) == 1, "autoencoder checkpoint " + path +
                                               ": unsupported version");
  AeModel model = init_ae(ae_config_from_json(header.at("config")));
  const std::size_t base = 16 + hlen;
  const Json& tensors = header.at("tensors");
  std::size_t expected = model.encoder.params.size() + model.decoder.size() + 1;
  require(tensors.size() == expected, "autoencoder checkpoint " + path +
                                          ": tensor count does not match config");
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const std::string field = "$.tensors[" + std::to_string(k) + "]";
    const std::string name = tensors[k].at("name").get<std::string>();
    const std::size_t off = tensors[k].at("offset").get<std::size_t>();
    if (name == "output_scale") {
      std::vector<double>& scale = model.output_scale;
      require(tensors[k].at("shape").get<std::vector<std::size_t>>() ==
                  std::vector<std::size_t>{1, scale.size()},
              "autoencoder checkpoint " + path + ": " + field + " shape mismatch for " + name);
      require(base + 4 * (off + scale.size()) <= in.size(),
              "autoencoder checkpoint " + path + ": " + field + " payload truncated");
      for (std::size_t i = 0; i < scale.size(); ++i) scale[i] = get_f32(in, base + 4 * (off + i));
      continue;
    }
    const bool is_enc = name.rfind("encoder.", 0) == 0;
    ParamSet& ps = is_enc ? model.encoder.params : model.decoder;
    const std::string key = is_enc ? name.substr(8) : name;
    require(ps.contains(key), "autoencoder checkpoint " + path + ": " + field +
                                  " unknown tensor " + name);
    Tensor& t = ps.at(key);
    require(tensors[k].at("shape").get<std::vector<std::size_t>>() == t.shape(),
            "autoencoder checkpoint " + path + ": " + field + " shape mismatch for " + name);
    require(base + 4 * (off + t.size()) <= in.size(),
            "autoencoder checkpoint " + path + ": " + field + " payload truncated");
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_f32(in, base + 4 * (off + i));
  }
  return model;
}

}  // namespace symcanon
