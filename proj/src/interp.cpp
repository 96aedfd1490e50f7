#include "symcanon/interp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "symcanon/error.hpp"

namespace symcanon {

Network interpolate(const Network& a, const Network& b, double gamma) {
  require(a.arch() == b.arch(), "interpolate: architectures differ (" + a.arch().str() + " vs " +
                                    b.arch().str() + ")");
  require(a.hidden == b.hidden, "interpolate: activations differ");
  require(gamma >= 0.0 && gamma <= 1.0, "interpolate: gamma must be in [0, 1]");
  Network out = a;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    auto& o = out.layers[l];
    const auto& A = a.layers[l];
    const auto& B = b.layers[l];
    for (std::size_t i = 0; i < o.weight.size(); ++i)
      o.weight[i] = gamma * A.weight[i] + (1.0 - gamma) * B.weight[i];
    for (std::size_t i = 0; i < o.bias.size(); ++i)
      o.bias[i] = gamma * A.bias[i] + (1.0 - gamma) * B.bias[i];
  }
  return out;
}

std::vector<double> gamma_grid(std::size_t n_points) {
  require(n_points >= 3, "barrier curve needs at least 3 points");
  std::vector<double> g(n_points);
  for (std::size_t k = 0; k < n_points; ++k)
    g[k] = static_cast<double>(k) / static_cast<double>(n_points - 1);
  g.back() = 1.0;
  return g;
}

BarrierCurve sample_curve(std::size_t n_points, const std::function<LossPoint(double)>& eval) {
  BarrierCurve c;
  c.gammas = gamma_grid(n_points);
  bool with_acc = true;
  std::vector<double> acc;
  for (double g : c.gammas) {
    LossPoint p = eval(g);
    c.losses.push_back(p.loss);
    if (p.accuracy)
      acc.push_back(*p.accuracy);
    else
      with_acc = false;
  }
  if (with_acc) c.accuracies = std::move(acc);
  return c;
}

BarrierCurve barrier_curve(const Network& a, const Network& b, const NetLossFn& loss_fn,
                           std::size_t n_points) {
  require(a.arch() == b.arch(), "barrier_curve: architectures differ");
  return sample_curve(n_points, [&](double g) {
    if (g == 1.0) return loss_fn(a);
    if (g == 0.0) return loss_fn(b);
    return loss_fn(interpolate(a, b, g));
  });
}

void validate(const BarrierCurve& curve) {
  require(curve.gammas.size() >= 2, "barrier curve needs at least two points");
  require(curve.gammas.size() == curve.losses.size(), "barrier curve length mismatch");
  require(curve.accuracies.empty() || curve.accuracies.size() == curve.gammas.size(),
          "barrier curve accuracy length mismatch");
  require(curve.gammas.front() == 0.0 && curve.gammas.back() == 1.0,
          "barrier curve must include gamma = 0 and gamma = 1");
  for (std::size_t i = 1; i < curve.gammas.size(); ++i)
    require(curve.gammas[i] > curve.gammas[i - 1], "barrier curve gammas must be increasing");
}

double barrier(const BarrierCurve& curve) {
  validate(curve);
  const double l0 = curve.losses.front();
  const double l1 = curve.losses.back();
  double b = 0.0;
  for (std::size_t i = 0; i < curve.gammas.size(); ++i) {
    const double g = curve.gammas[i];
    b = std::max(b, curve.losses[i] - (g * l1 + (1.0 - g) * l0));
  }
  return b;
}

double kendall_tau(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size(), "kendall_tau: length mismatch");
  require(xs.size() >= 2, "kendall_tau: need at least two observations");
  const std::size_t n = xs.size();
  long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      ++pairs;
      const double dx = xs[i] - xs[j];
      const double dy = ys[i] - ys[j];
      if (dx == 0.0) ++ties_x;
      if (dy == 0.0) ++ties_y;
      if (dx == 0.0 || dy == 0.0) continue;
      if ((dx > 0) == (dy > 0))
        ++concordant;
      else
        ++discordant;
    }
  }
  const double denom = std::sqrt(static_cast<double>(pairs - ties_x) *
                                 static_cast<double>(pairs - ties_y));
  require(denom > 0.0, "kendall_tau: undefined for fully tied input");
  return static_cast<double>(concordant - discordant) / denom;
}

NetLossFn inr_loss(Image reference) {
  return [ref = std::move(reference)](const Network& net) {
    return LossPoint{image_mse(render_inr(net, ref.height, ref.width), ref), std::nullopt};
  };
}

NetLossFn classifier_loss(ClsData probe) {
  return [p = std::move(probe)](const Network& net) {
    ClsMetrics m = evaluate_classifier(net, p);
    return LossPoint{m.cross_entropy, m.accuracy};
  };
}

std::string curve_to_csv(const BarrierCurve& curve) {
  validate(curve);
  const bool acc = !curve.accuracies.empty();
  std::string out = acc ? "gamma,loss,accuracy\n" : "gamma,loss\n";
  char buf[96];
  for (std::size_t i = 0; i < curve.gammas.size(); ++i) {
    if (acc)
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n", curve.gammas[i], curve.losses[i],
                    curve.accuracies[i]);
    else
      std::snprintf(buf, sizeof buf, "%.9g,%.9g\n", curve.gammas[i], curve.losses[i]);
    out += buf;
  }
  return out;
}

BarrierCurve curve_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "barrier csv: empty input");
  const bool acc = line == "gamma,loss,accuracy";
  require(acc || line == "gamma,loss", "barrier csv: unexpected header '" + line + "'");
  BarrierCurve c;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error("barrier csv: bad number on row " + std::to_string(row));
      }
    }
    require(vals.size() == (acc ? 3u : 2u), "barrier csv: wrong column count on row " +
                                                std::to_string(row));
    c.gammas.push_back(vals[0]);
    c.losses.push_back(vals[1]);
    if (acc) c.accuracies.push_back(vals[2]);
  }
  validate(c);
  return c;
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Summary summarize(const std::vector<double>& values) {
  return {quantile(values, 0.5), quantile(values, 0.25), quantile(values, 0.75)};
}

}  // namespace symcanon
