#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "symcanon/image.hpp"
#include "symcanon/network.hpp"
#include "symcanon/training.hpp"

namespace symcanon {

struct BarrierCurve {
  std::vector<double> gammas;
  std::vector<double> losses;
  std::vector<double> accuracies;  // empty unless the task reports accuracy
};

struct LossPoint {
  double loss = 0.0;
  std::optional<double> accuracy;
};

using NetLossFn = std::function<LossPoint(const Network&)>;

// Elementwise gamma * a + (1 - gamma) * b.
Network interpolate(const Network& a, const Network& b, double gamma);

std::vector<double> gamma_grid(std::size_t n_points);

// Evaluates `eval(gamma)` on a uniform grid of n_points >= 3 including 0 and 1.
BarrierCurve sample_curve(std::size_t n_points, const std::function<LossPoint(double)>& eval);

// loss_fn(interpolate(a, b, gamma)) on the grid: gamma = 1 is a, gamma = 0 is b.
BarrierCurve barrier_curve(const Network& a, const Network& b, const NetLossFn& loss_fn,
                           std::size_t n_points = 21);

void validate(const BarrierCurve& curve);

// max_gamma [loss(gamma) - (gamma * loss(1) + (1 - gamma) * loss(0))], clamped at 0.
double barrier(const BarrierCurve& curve);

// Tau-b with tie correction. Throws when either input is entirely tied.
double kendall_tau(const std::vector<double>& xs, const std::vector<double>& ys);

// Mean squared pixel error of the raw rendering against `reference`.
NetLossFn inr_loss(Image reference);
// Cross entropy and accuracy on a fixed probe batch.
NetLossFn classifier_loss(ClsData probe);

// "gamma,loss[,accuracy]" with 9 significant digits.
std::string curve_to_csv(const BarrierCurve& curve);
BarrierCurve curve_from_csv(const std::string& text);

struct Summary {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};
// Quantiles by linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);
Summary summarize(const std::vector<double>& values);

}  // namespace symcanon
