#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "mf/error.hpp"
#include "mf/io/csv.hpp"
#include "mf/io/pnm.hpp"
#include "mf/trainer/augment.hpp"
#include "mf/trainer/config.hpp"
#include "mf/trainer/data.hpp"
#include "mf/trainer/losses.hpp"
#include "mf/trainer/monitor.hpp"
#include "mf/trainer/optim.hpp"
#include "mf/trainer/train.hpp"
#include "test_util.hpp"

using namespace mf;
using namespace mf::trainer;
using metaformer::NamedTensor;

namespace {

metaformer::ModelConfig tiny(const std::string& sig) {
  metaformer::ModelConfig c;
  c.stage_channels = {8, 16, 24, 32};
  c.stage_depths = {1, 1, 1, 1};
  c.heads_divisor = 8;
  c.signature = metaformer::parse_signature(sig, 8);
  c.num_classes = 2;
  c.input_h = c.input_w = 32;
  return c;
}

// Softmax cross-entropy against smoothed one-hot targets, one row at a time.
double ce_oracle(const Tensor& logits, const std::vector<std::int64_t>& y, const std::vector<double>& w, double eps) {
  const auto B = logits.size(0), K = logits.size(1);
  double num = 0.0, den = 0.0;
  for (std::int64_t b = 0; b < B; ++b) {
    double z = 0.0;
    for (std::int64_t k = 0; k < K; ++k) z += std::exp(logits.at({b, k}));
    double l = 0.0;
    for (std::int64_t k = 0; k < K; ++k) {
      const double q = (k == y[b] ? 1.0 - eps : 0.0) + eps / K;
      l -= q * (logits.at({b, k}) - std::log(z));
    }
    const double wy = w.empty() ? 1.0 : w[y[b]];
    num += wy * l;
    den += wy;
  }
  return num / den;
}

}  // namespace

TEST(ClassWeights, Examples) {
  EXPECT_EQ(class_weights({5, 5, 5}), (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(class_weights({100, 1}), (std::vector<double>{1, 10}));
  EXPECT_EQ(class_weights({100, 25}), (std::vector<double>{1, 2}));
  EXPECT_EQ(class_weights({10000, 1}), (std::vector<double>{1, 10}));
  EXPECT_EQ(class_weights({7, 0}, 4.0), (std::vector<double>{1, 4}));
}

TEST(ClassWeights, ScaleInvariant) {
  const std::vector<std::int64_t> c{13, 40, 7, 91};
  const auto w = class_weights(c);
  for (std::int64_t k : {2, 3, 17}) {
    std::vector<std::int64_t> ck;
    for (auto v : c) ck.push_back(v * k);
    const auto wk = class_weights(ck);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(wk[i], w[i], 1e-15);
  }
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  for (std::int64_t K : {2, 3, 10}) {
    const Tensor logits = Tensor::full({4, K}, 0.3);
    EXPECT_NEAR(ce_loss(logits, {0, 1, 1, 0}).item(), std::log(static_cast<double>(K)), 1e-14);
  }
}

TEST(CrossEntropy, ConfidentCorrectLogitsApproachZero) {
  const Tensor logits = Tensor::from({2, 3}, {50, 0, 0, 0, 0, 50});
  EXPECT_LT(ce_loss(logits, {0, 2}).item(), 1e-20);
}

TEST(CrossEntropy, MatchesHandOracle) {
  Rng rng(1);
  const Tensor logits = param(uniform({6, 3}, -2, 2, rng));
  const std::vector<std::int64_t> y{0, 2, 1, 1, 0, 2};
  const std::vector<double> w{1.0, 2.5, 0.5};
  for (double eps : {0.0, 0.1, 0.3}) {
    EXPECT_NEAR(ce_loss(logits, y, {{}, eps, {}}).item(), ce_oracle(logits, y, {}, eps), 1e-12);
    EXPECT_NEAR(ce_loss(logits, y, {w, eps, {}}).item(), ce_oracle(logits, y, w, eps), 1e-12);
  }
  auto gc = testutil::check_gradients([&] { return ce_loss(logits, y, {w, 0.1, {}}); }, {{"logits", logits}});
  EXPECT_LT(gc.max_rel_error, 1e-6) << gc.worst;
}

TEST(CrossEntropy, DenseLogitsAndIgnoreIndex) {
  Rng rng(2);
  const Tensor logits = param(uniform({2, 3, 2, 2}, -2, 2, rng));
  const std::vector<std::int64_t> y{0, 1, 2, 1, 255, 0, 0, 2};
  const Tensor flat = permute(logits, {0, 2, 3, 1});
  std::vector<std::int64_t> kept_y;
  std::vector<double> kept;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 255) continue;
    kept_y.push_back(y[i]);
    for (std::int64_t k = 0; k < 3; ++k) kept.push_back(flat.data()[i * 3 + k]);
  }
  const Tensor rows({static_cast<std::int64_t>(kept_y.size()), 3}, kept);
  EXPECT_NEAR(ce_loss(logits, y, {{}, 0.1, 255}).item(), ce_oracle(rows, kept_y, {}, 0.1), 1e-12);
  auto gc = testutil::check_gradients([&] { return ce_loss(logits, y, {{}, 0.1, 255}); }, {{"logits", logits}});
  EXPECT_LT(gc.max_rel_error, 1e-6) << gc.worst;
  EXPECT_THROW(ce_loss(logits, {0, 1}), DimensionError);
}

TEST(Dice, HandOracleOnFourPixels) {
  const Tensor logits = Tensor::zeros({1, 2, 2, 2});
  const double d = 1e-5;
  const double per_class = (2 * 1.0 + d) / (2.0 + 2.0 + d);
  EXPECT_NEAR(dice_loss(logits, {0, 0, 1, 1}, false, d).item(), 1.0 - per_class, 1e-12);
  EXPECT_NEAR(dice_loss(logits, {0, 0, 1, 1}, true, d).item(), 1.0 - per_class, 1e-12);
}

TEST(Dice, PerfectPredictionNearZero) {
  const Tensor logits = Tensor::from({1, 2, 1, 4}, {40, -40, 40, -40, -40, 40, -40, 40});
  EXPECT_LT(dice_loss(logits, {0, 1, 0, 1}, false).item(), 1e-4);
}

TEST(Dice, EmptyClassSkipped) {
  // Class 2 is absent from the target and receives ~0 predicted mass.
  const Tensor logits = Tensor::from({1, 3, 1, 2}, {30, -30, -30, 30, -60, -60});
  const double with_skip = dice_loss(logits, {0, 1}, false).item();
  EXPECT_LT(with_skip, 1e-4);
  Rng rng(3);
  const Tensor soft = param(uniform({2, 3, 2, 2}, -1, 1, rng));
  const std::vector<std::int64_t> y{0, 1, 1, 0, 2, 2, 0, 1};
  auto gc = testutil::check_gradients([&] { return dice_loss(soft, y, true); }, {{"soft", soft}});
  EXPECT_LT(gc.max_rel_error, 1e-6) << gc.worst;
}

TEST(AdamW, ZeroGradientCases) {
  Tensor w = param(Tensor::from({3}, {1.0, -2.0, 4.0}));
  w.ensure_grad();
  std::vector<NamedTensor> params{{"w", w}};
  AdamWState st;
  adamw_step(params, st, {1.0, 0.0});
  EXPECT_EQ(w.data()[1], -2.0);
  adamw_step(params, st, {1.0, 0.1});
  EXPECT_NEAR(w.data()[0], 0.9, 1e-15);
  EXPECT_NEAR(w.data()[1], -1.8, 1e-15);
  EXPECT_NEAR(w.data()[2], 3.6, 1e-15);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  Tensor w = param(Tensor::from({2}, {0.0, 0.0}));
  w.ensure_grad()[0] = 3.0;
  w.mutable_grad()[1] = -0.01;
  std::vector<NamedTensor> params{{"w", w}};
  AdamWState st;
  adamw_step(params, st, {0.01, 0.0, 0.9, 0.999, 0.0});
  EXPECT_NEAR(w.data()[0], -0.01, 1e-15);
  EXPECT_NEAR(w.data()[1], 0.01, 1e-15);
}

TEST(AdamW, NonFiniteGradientAbortsBeforeChange) {
  Tensor a = param(Tensor::from({1}, {1.0})), b = param(Tensor::from({1}, {2.0}));
  a.ensure_grad()[0] = 1.0;
  b.ensure_grad()[0] = NAN;
  AdamWState st;
  EXPECT_THROW(adamw_step({{"a", a}, {"b", b}}, st, {}), NumericError);
  EXPECT_EQ(a.data()[0], 1.0);
  EXPECT_EQ(st.step, 0);
}

TEST(AdamW, QuadraticConverges) {
  Tensor w = param(Tensor::from({1}, {-4.0}));
  std::vector<NamedTensor> params{{"w", w}};
  AdamWState st;
  const std::int64_t total = 2000;
  for (std::int64_t s = 0; s < total; ++s) {
    w.zero_grad();
    {
      Tape tape;
      const Tensor d = add(w, Tensor::from({1}, {-3.0}));
      tape.backward(sum(mul(d, d)));
    }
    adamw_step(params, st, {lr_schedule(s, total, 0, 0.1, 0.0), 0.0});
  }
  EXPECT_NEAR(w.data()[0], 3.0, 1e-6);
}

TEST(Schedule, BoundaryValues) {
  const double lr = 1e-3, lo = 1e-5;
  EXPECT_EQ(lr_schedule(0, 100, 10, lr, lo), 0.0);
  EXPECT_DOUBLE_EQ(lr_schedule(5, 100, 10, lr, lo), lr / 2);
  EXPECT_DOUBLE_EQ(lr_schedule(10, 100, 10, lr, lo), lr);
  EXPECT_NEAR(lr_schedule(99, 100, 10, lr, lo), lo, 1e-12);
  EXPECT_NEAR(lr_schedule(10 + 44, 99, 10, lr, lo), (lr + lo) / 2, 1e-15);
  EXPECT_THROW(lr_schedule(100, 100, 10, lr, lo), ConfigError);
  EXPECT_THROW(lr_schedule(0, 10, 10, lr, lo), ConfigError);
}

TEST(Schedule, ContinuousAtJoint) {
  const double lr = 2e-3, lo = 0.0;
  const std::int64_t total = 100000, warm = 5000;
  const double before = lr_schedule(warm - 1, total, warm, lr, lo);
  const double at = lr_schedule(warm, total, warm, lr, lo);
  const double after = lr_schedule(warm + 1, total, warm, lr, lo);
  EXPECT_NEAR(at - before, lr / warm, 1e-12);
  EXPECT_LT(at - after, lr / warm);
  for (std::int64_t s = warm; s + 1 < total; s += 997) EXPECT_GE(lr_schedule(s, total, warm, lr, lo), lr_schedule(s + 1, total, warm, lr, lo));
}

TEST(Augment, ZeroSigmaIsIdentity) {
  Rng rng(4), data(5);
  const Tensor img = uniform({3, 7, 9}, 0, 1, data);
  const Tensor out = affine_augment(img, rng, 0.0);
  EXPECT_EQ(out.shape(), img.shape());
  EXPECT_LT(testutil::max_abs_diff(out, img), 1e-12);
}

TEST(Augment, TranslationShiftsDelta) {
  Tensor img({1, 8, 10});
  img.mutable_data()[3 * 10 + 5] = 1.0;
  // Output pixel samples input at x + 2 px (0.4 normalized) and y - 1 px.
  const Affine a{1, 0, 2 * 2.0 / 10, 0, 1, -1 * 2.0 / 8};
  const Tensor out = apply_affine(img, a);
  for (std::int64_t y = 0; y < 8; ++y)
    for (std::int64_t x = 0; x < 10; ++x) EXPECT_NEAR(out.at({0, y, x}), (y == 4 && x == 3) ? 1.0 : 0.0, 1e-12);
  std::vector<std::int64_t> mask(80, 0);
  mask[3 * 10 + 5] = 2;
  const auto m = apply_affine_mask(mask, 8, 10, a, 9);
  EXPECT_EQ(m[4 * 10 + 3], 2);
  EXPECT_EQ(m[0 * 10 + 9], 9);
}

TEST(PatchSampler, RareClassOddsTwoToOne) {
  // Class 1 covers 20 of 100 pixels: frequency ratio 1:4, so per-pixel odds 2:1.
  std::vector<std::int64_t> mask(100, 0);
  for (int i = 0; i < 20; ++i) mask[i] = 1;
  const PatchSampler sampler({mask}, {10}, {10}, 1, 1);
  ASSERT_EQ(sampler.candidates(), 100u);
  Rng rng(6);
  std::int64_t rare = 0;
  const std::int64_t draws = 100000;
  for (std::int64_t i = 0; i < draws; ++i) rare += sampler.center_class(sampler.sample(rng)) == 1 ? 1 : 0;
  const double per_pixel_ratio = (static_cast<double>(rare) / 20) / (static_cast<double>(draws - rare) / 80);
  EXPECT_NEAR(per_pixel_ratio, 2.0, 0.1);
}

TEST(PatchSampler, SingleClassIsUniformAndSeeded) {
  std::vector<std::int64_t> mask(6 * 7, 3);
  const PatchSampler sampler({mask}, {6}, {7}, 3, 3);
  EXPECT_EQ(sampler.candidates(), 4u * 5u);
  Rng r1(7), r2(7);
  std::vector<int> hist(20, 0);
  for (int i = 0; i < 40000; ++i) {
    const auto p = sampler.sample(r1);
    const auto q = sampler.sample(r2);
    ASSERT_EQ(p.top, q.top);
    ASSERT_EQ(p.left, q.left);
    ++hist[p.top * 5 + p.left];
  }
  for (int h : hist) EXPECT_NEAR(h, 2000, 200);
}

TEST(Monitor, NormsAndAlarm) {
  Tensor a = param(Tensor::from({2}, {0, 0})), b = param(Tensor::from({2}, {0, 0})), c = param(Tensor::zeros({1}));
  a.ensure_grad()[0] = 3;
  a.mutable_grad()[1] = 4;
  b.ensure_grad();
  const std::vector<NamedTensor> params{{"a", a}, {"b", b}, {"c", c}};
  auto r = grad_norm_monitor(params, 5.0);
  EXPECT_EQ(r.norms[0].second, 5.0);
  EXPECT_EQ(r.norms[1].second, 0.0);
  EXPECT_EQ(r.norms[2].second, 0.0);
  EXPECT_EQ(r.max_name, "a");
  EXPECT_FALSE(r.alarm);
  EXPECT_TRUE(grad_norm_monitor(params, 4.99).alarm);
  b.mutable_grad()[0] = INFINITY;
  EXPECT_TRUE(grad_norm_monitor(params, 1e9).alarm);
  EXPECT_NE(r.describe().find("a"), std::string::npos);
}

TEST(Data, SyntheticSeparableIsBalancedAndSeeded) {
  const auto d = synthetic_separable(10, 8, 3, 1);
  EXPECT_EQ(d.images.shape(), (Shape{10, 3, 8, 8}));
  EXPECT_EQ(d.class_counts(), (std::vector<std::int64_t>{5, 5}));
  EXPECT_TRUE(testutil::bitwise_equal(d.images, synthetic_separable(10, 8, 3, 1).images));
  const auto s = d.subset({3, 0});
  EXPECT_EQ(s.labels, (std::vector<std::int64_t>{d.labels[3], d.labels[0]}));
  EXPECT_EQ(s.images.at({0, 2, 1, 1}), d.images.at({3, 2, 1, 1}));
}

TEST(Data, LoadsClassificationAndSegmentationFolders) {
  const auto dir = std::filesystem::temp_directory_path() / "mf_test_folder";
  std::filesystem::create_directories(dir);
  io::Image8 img{4, 2, 1, {0, 51, 102, 153, 204, 255, 0, 0}};
  io::Image8 mask{4, 2, 1, {0, 1, 1, 0, 0, 0, 1, 1}};
  io::write_pnm((dir / "a.pgm").string(), img);
  io::write_pnm((dir / "m.pgm").string(), mask);
  io::write_text((dir / "labels.csv").string(), "file,label\na.pgm,1\na.pgm,0\n");
  io::write_text((dir / "pairs.csv").string(), "image,mask\na.pgm,m.pgm\n");
  const auto c = load_classification_folder(dir.string(), 2);
  EXPECT_EQ(c.images.shape(), (Shape{2, 1, 2, 4}));
  EXPECT_EQ(c.labels, (std::vector<std::int64_t>{1, 0}));
  EXPECT_DOUBLE_EQ(c.images.at({0, 0, 0, 1}), 0.2);
  const auto s = load_segmentation_folder(dir.string(), 2);
  EXPECT_EQ(s.masks, (std::vector<std::int64_t>{0, 1, 1, 0, 0, 0, 1, 1}));
  EXPECT_THROW(load_segmentation_folder(dir.string(), 1), DataError);
  EXPECT_THROW(load_classification_folder((dir / "nope").string(), 2), DataError);
  std::filesystem::remove_all(dir);
}

TEST(TrainConfig, RoundTripAndValidation) {
  TrainConfig c;
  c.lr = 3e-4;
  c.loss = LossKind::ce_plus_dice;
  c.patch = 64;
  io::IniDocument doc;
  c.write(doc);
  EXPECT_EQ(TrainConfig::read(doc), c);
  doc.set("train", "bogus", "1");
  EXPECT_THROW(TrainConfig::read(doc), ConfigError);
  TrainConfig bad;
  bad.lr = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Train, ShortRunIsDeterministicAndLowersLoss) {
  const auto data = synthetic_separable(16, 32, 3, 11, 1.0, 0.5);
  TrainConfig cfg;
  cfg.max_steps = 12;
  cfg.batch_size = 8;
  cfg.warmup_epochs = 0;
  cfg.lr = 5e-3;
  cfg.seed = 3;
  std::ostringstream s1, s2;
  TrainLog l1(&s1), l2(&s2);
  metaformer::MetaFormer m1(tiny("pool3"), 1), m2(tiny("pool3"), 1);
  const auto r1 = train(m1, data, cfg, {nullptr, 0, &l1, true});
  const auto r2 = train(m2, data, cfg, {nullptr, 0, &l2, true});
  EXPECT_EQ(r1.steps, 12);
  EXPECT_EQ(s1.str(), s2.str());
  EXPECT_EQ(r1.final_loss, r2.final_loss);
  ASSERT_EQ(l1.rows().size(), 12u);
  EXPECT_LT(l1.rows().back().loss, l1.rows().front().loss);
  EXPECT_EQ(s1.str().substr(0, s1.str().find('\n')), TrainLog::header());
}

TEST(Train, CheckpointKeeperRestoresBest) {
  metaformer::MetaFormer m(tiny("pool3"), 1);
  CheckpointKeeper keeper;
  EXPECT_TRUE(keeper.offer(m, 0.7, 3));
  const Tensor saved = m.named_parameters()[0].tensor.clone();
  m.named_parameters()[0].tensor.mutable_data()[0] += 1.0;
  EXPECT_FALSE(keeper.offer(m, 0.6, 4));
  keeper.restore(m);
  EXPECT_TRUE(testutil::bitwise_equal(saved, m.named_parameters()[0].tensor));
  EXPECT_EQ(keeper.best_step(), 3);
}

TEST(Train, SegmentationWithPatchesAndDice) {
  auto data = synthetic_squares(4, 64, 1, 2);
  data.num_classes = 2;
  metaformer::ModelConfig mc = tiny("gconv3");
  mc.in_channels = 1;
  mc.head = metaformer::HeadKind::segment;
  mc.decoder_dim = 8;
  metaformer::MetaFormer m(mc, 1);
  TrainConfig cfg;
  cfg.max_steps = 4;
  cfg.batch_size = 2;
  cfg.warmup_epochs = 0;
  cfg.loss = LossKind::ce_plus_dice;
  cfg.patch = 32;
  const auto r = train(m, data, cfg, {&data, 2, nullptr, true});
  EXPECT_TRUE(std::isfinite(r.final_loss));
  ASSERT_TRUE(r.best_val.has_value());
  EXPECT_GE(*r.best_val, 0.0);
  EXPECT_LE(*r.best_val, 1.0);
}
