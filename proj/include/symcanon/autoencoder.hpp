#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symcanon/adam.hpp"
#include "symcanon/checkpoint.hpp"
#include "symcanon/interp.hpp"
#include "symcanon/metagraph.hpp"
#include "symcanon/network.hpp"

namespace symcanon {

enum class AeTask { Inr, Cls };
std::string task_name(AeTask t);
AeTask parse_task(const std::string& name);

struct AeConfig {
  AeTask task = AeTask::Inr;
  GmnConfig encoder{};
  std::vector<std::size_t> decoder_hidden{64, 128};  // SiLU between layers
  Arch target_arch{{2, 32, 32, 1}};
  Activation target_activation = Activation::sine(30.0);
  AdamConfig adam{.lr = 1e-3, .weight_decay = 1e-2, .warmup_steps = 100};
  double encoder_lr_scale = 0.1;  // encoder lr = adam.lr * encoder_lr_scale
  double temperature = 0.5;  // classifier loss only
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double val_fraction = 0.1;
  std::size_t grid_size = 16;       // INR loss renders on grid_size x grid_size
  std::size_t probe_samples = 512;  // classifier loss probe batch
  std::size_t jobs = 1;
  std::uint64_t seed = 0;
};

void validate(const AeConfig& config);
Json ae_config_to_json(const AeConfig& config);
AeConfig ae_config_from_json(const Json& j);

// Decoder layer k is "decoder.l<k>.w" (in x out) and "decoder.l<k>.b".
struct AeModel {
  AeConfig config;
  GmnParams encoder;
  ParamSet decoder;
  // Unit of each decoded parameter; the decoder output is multiplied by it.
  // init_ae uses the block RMS of a target draw, standardize_output the
  // spread over a zoo.
  std::vector<double> output_scale;
};

// The decoder emits parameters in per-block RMS units; its last layer starts
// small, with bias = a fresh draw of the target architecture in those units.
AeModel init_ae(const AeConfig& config);

Tensor encode_latent(const Network& net, const AeModel& model);
Network decode(const Tensor& z, const AeModel& model);
// decode(encode(net)).
Network canonicalize(const Network& net, const AeModel& model);

// Decoder on a tape: z is 1 x latent_dim, result is 1 x param_count.
Var decode_on_tape(Tape& tape, const BoundParams& decoder, const AeModel& model, Var z);

// Mean squared difference of the two nets' outputs on `grid`.
double loss_inr(const Network& decoded, const Network& source, const Tensor& grid);
// Mean over probe rows of KL(softmax(source / tau) || softmax(decoded / tau)).
double loss_cls(const Network& decoded, const Network& source, const Tensor& probe, double tau);

// Inputs the functional loss compares outputs on: the coordinate grid for
// INRs, a seeded Gaussian batch for classifiers.
Tensor loss_inputs(const AeConfig& config);
// Functional loss of decode(encode(source)) against source.
double reconstruction_loss(const Network& source, const AeModel& model, const Tensor& inputs);

// Loss and gradients for one source network, in ParamSet order.
struct AeGradient {
  double loss = 0.0;
  std::vector<Tensor> encoder;
  std::vector<Tensor> decoder;
};
AeGradient ae_gradient(const AeModel& model, const Network& source, const Tensor& inputs);

struct AeEpoch {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // epoch 0: before training; later: mean over the epoch's batches
  double val_loss = 0.0;
};

struct AeTrainResult {
  AeModel model;  // parameters with the best validation loss
  std::vector<AeEpoch> history;
  std::size_t best_epoch = 0;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> val_ids;
};

// Folds a per-dimension standardisation of the latents of `nets` into the
// first decoder layer, so decoder inputs start centred with unit spread.
void standardize_latent(AeModel& model, const std::vector<Network>& nets);

// Sets the decoder output units to the per-parameter spread of `nets` and the
// last-layer bias to their mean, so decoding starts at the zoo's mean weights.
void standardize_output(AeModel& model, const std::vector<Network>& nets);

// Standardises latent and output on the training split, then trains. Throws, naming
// the epoch, if a loss becomes non-finite.
AeTrainResult train_ae(const std::vector<Network>& dataset, const AeConfig& config);

// loss_fn(decode(gamma * z_a + (1 - gamma) * z_b)) over the gamma grid.
BarrierCurve latent_interpolate(const Network& a, const Network& b, const AeModel& model,
                                const NetLossFn& loss_fn, std::size_t n_points = 21);

std::string history_to_csv(const std::vector<AeEpoch>& history);

// "SYMCAE01", uint64 LE header length, JSON header, then every tensor as
// little-endian float32 in header order.
void save_ae(const AeModel& model, const std::string& path, const Json& meta = Json::object());
AeModel load_ae(const std::string& path);

}  // namespace symcanon
