#pragma once

#include <cstdint>
#include <vector>

#include "symcanon/adam.hpp"
#include "symcanon/image.hpp"
#include "symcanon/network.hpp"

namespace symcanon {

struct FitResult {
  Network net;
  std::vector<double> loss_history;  // loss before each update
  double final_loss = 0.0;           // loss of the returned parameters
};

struct InrTrainConfig {
  Arch arch{{2, 32, 32, 1}};
  double omega = 30.0;
  std::size_t steps = 2000;
  AdamConfig adam{};
  // Start from all-zero parameters and only train the biases.
  bool bias_only = false;
};

// Fits a SIREN to the image by full-batch mean squared pixel error.
// Throws (with the step index) if the loss becomes non-finite.
FitResult train_inr(const Image& image, const InrTrainConfig& config, std::uint64_t seed);

// Mean squared error between the raw output of `net` and `target` on the grid.
double inr_mse(const Network& net, const Image& target);

struct ClsData {
  Tensor x;  // n x dim
  std::vector<int> labels;
  std::size_t n_classes = 0;
};

// Gaussian blobs with class means drawn on a sphere of radius 2.
ClsData synth_blobs(std::size_t n_samples, std::size_t n_classes, std::size_t dim,
                    std::uint64_t seed);

struct ClsMetrics {
  double cross_entropy = 0.0;
  double accuracy = 0.0;
};

ClsMetrics evaluate_classifier(const Network& net, const ClsData& data);

struct ClsTrainConfig {
  Arch arch{{2, 16, 16, 3}};
  Activation hidden = Activation::relu();
  std::size_t steps = 500;
  AdamConfig adam{.lr = 1e-2};
};

FitResult train_classifier(const ClsData& data, const ClsTrainConfig& config, std::uint64_t seed);

}  // namespace symcanon
