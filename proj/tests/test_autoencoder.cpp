#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "support.hpp"
#include "symcanon/autoencoder.hpp"
#include "symcanon/error.hpp"
#include "symcanon/image.hpp"
#include "symcanon/interp.hpp"
#include "symcanon/symmetry.hpp"

using namespace symcanon;
using symcanon::testing::median;
using symcanon::testing::oracle_forward;
using symcanon::testing::rel_distance;
using symcanon::testing::scratch_dir;

namespace {

AeConfig small_config(GmnVariant variant = GmnVariant::ScaleSign) {
  AeConfig c;
  c.encoder.variant = variant;
  c.encoder.hidden_dim = 8;
  c.encoder.latent_dim = 6;
  c.decoder_hidden = {16, 32};
  c.target_arch = parse_arch("2-6-6-1");
  c.target_activation = Activation::sine(30.0);
  c.grid_size = 6;
  c.epochs = 2;
  c.batch_size = 2;
  c.seed = 7;
  return c;
}

Network small_siren(std::uint64_t seed) { return init_siren(parse_arch("2-6-6-1"), 30.0, seed); }

// 1 -> 2 linear net with zero weights: logits equal the biases.
Network logits_net(double b0, double b1) {
  Network net;
  DenseLayer L(1, 2);
  L.bias = {b0, b1};
  net.layers = {L};
  return net;
}

double oracle_inr_loss(const Network& a, const Network& b, const Tensor& grid) {
  double s = 0.0;
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    const std::vector<double> x{grid(r, 0), grid(r, 1)};
    const double d = oracle_forward(a, x)[0] - oracle_forward(b, x)[0];
    s += d * d;
  }
  return s / static_cast<double>(grid.rows());
}

}  // namespace

// ---------------------------------------------------------------------------
// Model and decoder.

TEST(AeModel, DecoderOutputWidthIsTargetParamCount) {
  const AeModel m = init_ae(small_config());
  const std::size_t last = m.config.decoder_hidden.size();
  const Tensor& w = m.decoder.at("decoder.l" + std::to_string(last) + ".w");
  EXPECT_EQ(w.cols(), parse_arch("2-6-6-1").param_count());
  EXPECT_EQ(m.output_scale.size(), w.cols());
  const Network out = decode(Tensor({1, 6}, std::vector<double>(6, 0.3)), m);
  EXPECT_EQ(out.arch(), parse_arch("2-6-6-1"));
  EXPECT_EQ(out.hidden, Activation::sine(30.0));
}

TEST(AeModel, ZeroDecoderGivesZeroNetwork) {
  AeModel m = init_ae(small_config());
  for (auto& t : m.decoder.values())
    for (auto& v : t.data()) v = 0.0;
  const Network out = decode(Tensor({1, 6}, std::vector<double>(6, 1.5)), m);
  EXPECT_EQ(out, zeros_like(parse_arch("2-6-6-1"), Activation::sine(30.0)));
}

TEST(AeModel, InitIsDeterministicAndSeeded) {
  const AeModel a = init_ae(small_config());
  const AeModel b = init_ae(small_config());
  EXPECT_EQ(a.decoder.values(), b.decoder.values());
  EXPECT_EQ(a.encoder.params.values(), b.encoder.params.values());
  AeConfig other = small_config();
  other.seed = 8;
  EXPECT_NE(init_ae(other).decoder.values(), a.decoder.values());
}

TEST(AeModel, DecodeRejectsWrongLatentSize) {
  const AeModel m = init_ae(small_config());
  EXPECT_THROW(decode(Tensor({1, 5}, std::vector<double>(5, 0.0)), m), Error);
  EXPECT_THROW(encode_latent(init_siren(parse_arch("2-5-1"), 30.0, 1), m), Error);
}

TEST(AeModel, ConfigValidation) {
  AeConfig c = small_config();
  c.target_arch = parse_arch("3-6-1");
  EXPECT_THROW(init_ae(c), Error);
  c = small_config();
  c.decoder_hidden.clear();
  EXPECT_THROW(init_ae(c), Error);
  c = small_config(GmnVariant::ScalePositive);
  EXPECT_THROW(init_ae(c), Error);
  c = small_config();
  c.encoder_lr_scale = 0.0;
  EXPECT_THROW(init_ae(c), Error);
}

// ---------------------------------------------------------------------------
// Functional losses.

TEST(LossInr, ZeroForIdenticalNets) {
  const Network a = small_siren(1);
  EXPECT_EQ(loss_inr(a, a, coord_grid(8, 8)), 0.0);
}

TEST(LossInr, ConstantOutputs) {
  Network zero = zeros_like(parse_arch("2-3-1"), Activation::sine(30.0));
  Network one = zero;
  one.layers.back().bias[0] = 1.0;
  EXPECT_DOUBLE_EQ(loss_inr(zero, one, coord_grid(5, 5)), 1.0);
}

TEST(LossInr, MatchesOracle) {
  const Tensor grid = coord_grid(7, 7);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Network a = small_siren(10 + s), b = small_siren(20 + s);
    EXPECT_NEAR(loss_inr(a, b, grid), oracle_inr_loss(a, b, grid), 1e-12);
  }
}

TEST(LossInr, RejectsWrongArity) {
  const Network cls = init_mlp(parse_arch("2-4-3"), Activation::relu(), 1);
  EXPECT_THROW(loss_inr(cls, cls, coord_grid(4, 4)), Error);
}

TEST(LossCls, IdenticalIsZero) {
  const Network a = init_mlp(parse_arch("2-5-3"), Activation::relu(), 2);
  Pcg32 rng(1);
  const Tensor probe = symcanon::testing::random_tensor(rng, 20, 2);
  EXPECT_NEAR(loss_cls(a, a, probe, 0.5), 0.0, 1e-12);
}

TEST(LossCls, HandExample) {
  // source softmax = (1/3, 2/3), decoded = (1/2, 1/2).
  const Tensor probe({3, 1}, {0.0, 1.0, -2.0});
  const double expected = std::log(2.0 / 3.0) / 3.0 + 2.0 * std::log(4.0 / 3.0) / 3.0;
  EXPECT_NEAR(loss_cls(logits_net(0, 0), logits_net(0, std::log(2.0)), probe, 1.0), expected,
              1e-12);
  // Temperature divides the logits: softmax([0, 2 ln 2]) = (1/5, 4/5).
  const double kl_half = 0.2 * std::log(0.2 / 0.5) + 0.8 * std::log(0.8 / 0.5);
  EXPECT_NEAR(loss_cls(logits_net(0, 0), logits_net(0, std::log(2.0)), probe, 0.5), kl_half,
              1e-12);
}

TEST(LossCls, NonNegativeAndZeroOnlyWhenEqual) {
  Pcg32 rng(3);
  const Tensor probe = symcanon::testing::random_tensor(rng, 16, 2);
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Network a = init_mlp(parse_arch("2-4-3"), Activation::tanh(), 100 + s);
    const Network b = init_mlp(parse_arch("2-4-3"), Activation::tanh(), 200 + s);
    EXPECT_GT(loss_cls(a, b, probe, 0.5), 1e-10);
    EXPECT_GT(loss_cls(b, a, probe, 0.5), 1e-10);
  }
}

TEST(LossCls, RejectsNonFiniteAndMismatch) {
  const Tensor probe({2, 1}, {0.0, 1.0});
  EXPECT_THROW(loss_cls(logits_net(0, NAN), logits_net(0, 0), probe, 1.0), Error);
  EXPECT_THROW(loss_cls(logits_net(0, 0), logits_net(0, 0), probe, 0.0), Error);
  const Network three = init_mlp(parse_arch("1-3"), Activation::identity(), 1);
  EXPECT_THROW(loss_cls(three, logits_net(0, 0), probe, 1.0), Error);
}

// ---------------------------------------------------------------------------
// Canonicalization.

TEST(Canonicalize, OrbitInvariantForScaleSign) {
  const AeModel m = init_ae(small_config());
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Network a = small_siren(30 + s);
    const NetworkTransform g =
        sample_transform(a.arch(), ScaleDomain::SignFlip, true, true, 40 + s);
    const Network ca = canonicalize(a, m), cb = canonicalize(apply(g, a), m);
    EXPECT_LE(rel_distance(flatten(cb), flatten(ca)), 1e-5);
  }
}

// Latent and output are standardized over the test nets, as train_ae does
// before its first step.
TEST(Canonicalize, PlainVariantSeesSignFlips) {
  AeModel m = init_ae(small_config(GmnVariant::Plain));
  std::vector<Network> nets;
  for (std::uint64_t s = 0; s < 20; ++s) nets.push_back(small_siren(50 + s));
  standardize_latent(m, nets);
  standardize_output(m, nets);
  std::vector<double> d;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const NetworkTransform g =
        sample_transform(nets[s].arch(), ScaleDomain::SignFlip, false, true, 60 + s);
    d.push_back(rel_distance(flatten(canonicalize(apply(g, nets[s]), m)),
                             flatten(canonicalize(nets[s], m))));
  }
  EXPECT_GT(median(d), 1e-2);
}

TEST(LatentInterpolate, SameNetIsFlat) {
  const AeModel m = init_ae(small_config());
  const Network a = small_siren(3);
  const Image ref = render_glyph(GlyphClass::Cross, 8, 1);
  const BarrierCurve c = latent_interpolate(a, a, m, inr_loss(ref), 7);
  for (double v : c.losses) EXPECT_EQ(v, c.losses.front());
}

TEST(LatentInterpolate, OrbitPairIsFlatAndEndpointsMatch) {
  const AeModel m = init_ae(small_config());
  const Network a = small_siren(4);
  const Network b = apply(sample_transform(a.arch(), ScaleDomain::SignFlip, true, true, 5), a);
  const Image ref = render_glyph(GlyphClass::Diagonal, 8, 2);
  const NetLossFn fn = inr_loss(ref);
  const BarrierCurve c = latent_interpolate(a, b, m, fn, 9);
  EXPECT_EQ(c.losses.back(), fn(canonicalize(a, m)).loss);
  EXPECT_EQ(c.losses.front(), fn(canonicalize(b, m)).loss);
  for (double v : c.losses) EXPECT_NEAR(v, c.losses.back(), 1e-5);
}

// ---------------------------------------------------------------------------
// Gradients and training.

TEST(AeGradient, EveryTensorReceivesGradient) {
  const AeConfig c = small_config();
  const AeModel m = init_ae(c);
  const AeGradient g = ae_gradient(m, small_siren(9), loss_inputs(c));
  EXPECT_GT(g.loss, 0.0);
  ASSERT_EQ(g.encoder.size(), m.encoder.params.size());
  ASSERT_EQ(g.decoder.size(), m.decoder.size());
  auto nonzero = [](const Tensor& t) {
    for (double v : t.data())
      if (v != 0.0) return true;
    return false;
  };
  for (std::size_t i = 0; i < g.decoder.size(); ++i)
    EXPECT_TRUE(nonzero(g.decoder[i])) << m.decoder.names()[i];
  const std::vector<std::string> enc_names = m.encoder.params.names();
  for (std::size_t i = 0; i < g.encoder.size(); ++i)
    EXPECT_TRUE(nonzero(g.encoder[i])) << enc_names[i];
}

TEST(AeGradient, MatchesFiniteDifferenceOnDecoderBias) {
  const AeConfig c = small_config();
  AeModel m = init_ae(c);
  const Network src = small_siren(11);
  const Tensor grid = loss_inputs(c);
  const AeGradient g = ae_gradient(m, src, grid);
  const std::size_t last = c.decoder_hidden.size();
  const std::string name = "decoder.l" + std::to_string(last) + ".b";
  const std::size_t idx = m.decoder.index(name);
  for (std::size_t i : {0u, 5u, 17u, 40u}) {
    const double h = 1e-6;
    Tensor& b = m.decoder.at(name);
    const double b0 = b[i];
    b[i] = b0 + h;
    const double lp = reconstruction_loss(src, m, grid);
    b[i] = b0 - h;
    const double lm = reconstruction_loss(src, m, grid);
    b[i] = b0;
    const double fd = (lp - lm) / (2.0 * h);
    EXPECT_NEAR(g.decoder[idx][i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(TrainAe, SingleNetworkIsFitExactly) {
  AeConfig c = small_config();
  c.epochs = 150;
  c.batch_size = 1;
  c.val_fraction = 0.0;
  c.adam.warmup_steps = 10;
  c.adam.weight_decay = 0.0;
  const AeTrainResult r = train_ae({small_siren(12)}, c);
  ASSERT_EQ(r.history.size(), 151u);
  EXPECT_LT(r.history.back().train_loss, 1e-3 * r.history.front().train_loss);
}

TEST(TrainAe, SmallZooHalvesTrainingLoss) {
  AeConfig c = small_config();
  c.epochs = 80;
  c.batch_size = 4;
  c.val_fraction = 0.0;
  std::vector<Network> zoo;
  for (std::uint64_t s = 0; s < 4; ++s) zoo.push_back(small_siren(70 + s));
  const AeTrainResult r = train_ae(zoo, c);
  EXPECT_LE(r.history.back().train_loss, 0.5 * r.history.front().train_loss);
}

TEST(TrainAe, DeterministicAndJobIndependent) {
  AeConfig c = small_config();
  std::vector<Network> zoo;
  for (std::uint64_t s = 0; s < 5; ++s) zoo.push_back(small_siren(80 + s));
  const AeTrainResult a = train_ae(zoo, c);
  const AeTrainResult b = train_ae(zoo, c);
  c.jobs = 3;
  const AeTrainResult p = train_ae(zoo, c);
  EXPECT_EQ(history_to_csv(a.history), history_to_csv(b.history));
  EXPECT_EQ(history_to_csv(a.history), history_to_csv(p.history));
  EXPECT_EQ(a.model.decoder.values(), p.model.decoder.values());
  EXPECT_EQ(a.model.encoder.params.values(), p.model.encoder.params.values());
  EXPECT_EQ(a.train_ids.size() + a.val_ids.size(), zoo.size());
  EXPECT_EQ(a.val_ids.size(), 1u);
}

TEST(TrainAe, RejectsMismatchedZoo) {
  const AeConfig c = small_config();
  EXPECT_THROW(train_ae({}, c), Error);
  EXPECT_THROW(train_ae({small_siren(1), init_siren(parse_arch("2-5-1"), 30.0, 2)}, c), Error);
}

TEST(StandardizeLatent, DecoderSeesCentredUnitInputs) {
  AeModel m = init_ae(small_config());
  std::vector<Network> nets;
  for (std::uint64_t s = 0; s < 8; ++s) nets.push_back(small_siren(90 + s));
  const AeModel before = m;
  standardize_latent(m, nets);
  // First-layer pre-activations after folding equal those of the
  // explicitly standardised latent before folding.
  const Tensor& w0 = before.decoder.at("decoder.l0.w");
  const Tensor& b0 = before.decoder.at("decoder.l0.b");
  const Tensor& w1 = m.decoder.at("decoder.l0.w");
  const Tensor& b1 = m.decoder.at("decoder.l0.b");
  const std::size_t d = 6;
  std::vector<Tensor> zs;
  for (const auto& n : nets) zs.push_back(encode_latent(n, m));
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (const auto& z : zs)
    for (std::size_t k = 0; k < d; ++k) mean[k] += z[k] / 8.0;
  for (const auto& z : zs)
    for (std::size_t k = 0; k < d; ++k) sd[k] += (z[k] - mean[k]) * (z[k] - mean[k]) / 8.0;
  for (auto& v : sd) v = std::sqrt(v);
  for (const auto& z : zs) {
    for (std::size_t j = 0; j < w0.cols(); ++j) {
      double folded = b1[j], explicit_pre = b0[j];
      for (std::size_t k = 0; k < d; ++k) {
        folded += z[k] * w1(k, j);
        explicit_pre += (z[k] - mean[k]) / sd[k] * w0(k, j);
      }
      EXPECT_NEAR(folded, explicit_pre, 1e-9 * std::max(1.0, std::abs(explicit_pre)));
    }
  }
}

TEST(StandardizeOutput, ZeroLastLayerDecodesZooMean) {
  AeModel m = init_ae(small_config());
  std::vector<Network> nets;
  for (std::uint64_t s = 0; s < 8; ++s) nets.push_back(small_siren(100 + s));
  standardize_output(m, nets);
  const std::size_t P = m.output_scale.size();
  std::vector<double> mean(P, 0.0), sd(P, 0.0);
  for (const auto& n : nets) {
    const std::vector<double> f = flatten(n);
    for (std::size_t p = 0; p < P; ++p) mean[p] += f[p] / 8.0;
  }
  for (const auto& n : nets) {
    const std::vector<double> f = flatten(n);
    for (std::size_t p = 0; p < P; ++p) sd[p] += (f[p] - mean[p]) * (f[p] - mean[p]) / 8.0;
  }
  // Random draws spread every parameter, so the floor never binds here.
  for (std::size_t p = 0; p < P; ++p) EXPECT_NEAR(m.output_scale[p], std::sqrt(sd[p]), 1e-12);
  for (auto& v : m.decoder.at("decoder.l2.w").data()) v = 0.0;
  const std::vector<double> out = flatten(canonicalize(nets[3], m));
  for (std::size_t p = 0; p < P; ++p) EXPECT_NEAR(out[p], mean[p], 1e-12);
}

TEST(StandardizeOutput, SingleNetKeepsUnitsAndDecodesIt) {
  AeModel m = init_ae(small_config());
  const std::vector<double> units = m.output_scale;
  const Network a = small_siren(110);
  standardize_output(m, {a});
  EXPECT_EQ(m.output_scale, units);
  for (auto& v : m.decoder.at("decoder.l2.w").data()) v = 0.0;
  const std::vector<double> out = flatten(canonicalize(a, m)), want = flatten(a);
  for (std::size_t p = 0; p < want.size(); ++p) EXPECT_NEAR(out[p], want[p], 1e-12);
}

// ---------------------------------------------------------------------------
// Serialization.

TEST(AeCheckpoint, RoundTripStoresFloat32) {
  AeModel m = init_ae(small_config());
  standardize_output(m, {small_siren(90), small_siren(91), small_siren(92)});
  const auto dir = scratch_dir("ae_ckpt");
  const std::string path = (dir / "m.bin").string();
  save_ae(m, path, {{"note", "x"}});
  const AeModel back = load_ae(path);
  ASSERT_EQ(back.decoder.size(), m.decoder.size());
  for (std::size_t i = 0; i < m.decoder.size(); ++i)
    for (std::size_t j = 0; j < m.decoder.values()[i].size(); ++j)
      EXPECT_EQ(back.decoder.values()[i][j],
                static_cast<double>(static_cast<float>(m.decoder.values()[i][j])));
  for (std::size_t i = 0; i < m.encoder.params.size(); ++i)
    for (std::size_t j = 0; j < m.encoder.params.values()[i].size(); ++j)
      EXPECT_EQ(back.encoder.params.values()[i][j],
                static_cast<double>(static_cast<float>(m.encoder.params.values()[i][j])));
  ASSERT_EQ(back.output_scale.size(), m.output_scale.size());
  for (std::size_t p = 0; p < m.output_scale.size(); ++p)
    EXPECT_EQ(back.output_scale[p], static_cast<double>(static_cast<float>(m.output_scale[p])));
  EXPECT_EQ(ae_config_to_json(back.config), ae_config_to_json(m.config));
  // Saving the loaded model is a fixed point.
  const std::string again = (dir / "again.bin").string();
  save_ae(back, again, {{"note", "x"}});
  std::ifstream f1(path, std::ios::binary), f2(again, std::ios::binary);
  const std::string s1((std::istreambuf_iterator<char>(f1)), {});
  const std::string s2((std::istreambuf_iterator<char>(f2)), {});
  EXPECT_EQ(s1, s2);
}

TEST(AeCheckpoint, RejectsBadMagicAndTruncation) {
  const AeModel m = init_ae(small_config());
  const auto dir = scratch_dir("ae_bad");
  const std::string path = (dir / "m.bin").string();
  save_ae(m, path);
  std::ifstream f(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(f)), {});
  auto write = [&](const std::string& name, const std::string& data) {
    const std::string p = (dir / name).string();
    std::ofstream(p, std::ios::binary) << data;
    return p;
  };
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(load_ae(write("magic.bin", bad)), Error);
  EXPECT_THROW(load_ae(write("short.bin", bytes.substr(0, bytes.size() - 4))), Error);
  EXPECT_THROW(load_ae(write("header.bin", bytes.substr(0, 30))), Error);
  EXPECT_THROW(load_ae((dir / "missing.bin").string()), Error);
}

TEST(AeConfigJson, RoundTrip) {
  AeConfig c = small_config();
  c.encoder.readout = ReadoutMode::LastLayer;
  c.encoder_lr_scale = 0.25;
  c.adam.warmup_steps = 33;
  const Json j = ae_config_to_json(c);
  EXPECT_EQ(ae_config_to_json(ae_config_from_json(j)), j);
  Json missing = j;
  missing.erase("lr");
  EXPECT_THROW(ae_config_from_json(missing), Error);
}

TEST(AeHistory, CsvHeaderAndRows) {
  const std::string csv = history_to_csv({{0, 0.5, 0.25}, {1, 0.125, 0.0625}});
  EXPECT_EQ(csv, "epoch,train_loss,val_loss\n0,0.5,0.25\n1,0.125,0.0625\n");
}
