#include <gtest/gtest.h>

#include <cmath>

#include "mf/error.hpp"
#include "test_util.hpp"

using namespace mf;
using testutil::check_gradients;

namespace {

constexpr double kGradTol = 1e-4;

Tensor rand_t(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  return param(uniform(std::move(s), lo, hi, rng));
}

}  // namespace

TEST(Tensor, HandlesShareStorageAndCloneCopies) {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = a;
  Tensor c = a.clone();
  b.mutable_data()[0] = 9;
  EXPECT_EQ(a.at({0, 0}), 9);
  EXPECT_EQ(c.at({0, 0}), 1);
  EXPECT_TRUE(a.same_as(b));
  EXPECT_FALSE(a.same_as(c));
  EXPECT_EQ(a.numel(), 4);
  EXPECT_EQ(a.size(-1), 2);
}

TEST(Tensor, RejectsDataOfWrongLength) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
}

TEST(Tape, BackwardTwiceIsAnError) {
  Tensor x = rand_t({3}, 1);
  Tape tape;
  Tensor y = sum(mul(x, x));
  tape.backward(y);
  EXPECT_THROW(tape.backward(y), TapeError);
}

TEST(Tape, NonScalarLossIsRejected) {
  Tensor x = rand_t({3}, 1);
  Tape tape;
  Tensor y = scale(x, 2.0);
  EXPECT_THROW(tape.backward(y), DimensionError);
}

TEST(Tape, NoGradGuardSuppressesRecording) {
  Tensor x = rand_t({3}, 1);
  Tape tape;
  {
    NoGradGuard ng;
    Tensor y = scale(x, 2.0);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Tape, GradientOfSquareIsTwiceInput) {
  Tensor x = Tensor::from({3}, {1, -2, 3});
  x.set_requires_grad(true);
  Tape tape;
  tape.backward(sum(mul(x, x)));
  EXPECT_EQ(x.grad()[0], 2);
  EXPECT_EQ(x.grad()[1], -4);
  EXPECT_EQ(x.grad()[2], 6);
}

TEST(Tape, ReusedInputAccumulatesGradient) {
  Tensor x = Tensor::from({1}, {3});
  x.set_requires_grad(true);
  Tape tape;
  tape.backward(sum(add(scale(x, 2.0), mul(x, x))));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2 + 6);
}

TEST(Ops, ElementwiseGradients) {
  Tensor a = rand_t({2, 3, 2}, 1), b = rand_t({2, 3, 2}, 2);
  for (auto f : std::vector<std::function<Tensor()>>{
           [&] { return add(a, b); }, [&] { return sub(a, b); }, [&] { return mul(a, b); },
           [&] { return scale(a, -1.5); }}) {
    auto gc = check_gradients(f, {{"a", a}, {"b", b}});
    EXPECT_LT(gc.max_rel_error, kGradTol) << gc.worst;
  }
}

TEST(Ops, BroadcastGradients) {
  Tensor x = rand_t({2, 3, 2, 2}, 1), y = rand_t({3, 2, 2}, 2), s = rand_t({3}, 3);
  auto g1 = check_gradients([&] { return add_broadcast(x, y); }, {{"x", x}, {"y", y}});
  EXPECT_LT(g1.max_rel_error, kGradTol) << g1.worst;
  auto g2 = check_gradients([&] { return mul_channels(x, s); }, {{"x", x}, {"s", s}});
  EXPECT_LT(g2.max_rel_error, kGradTol) << g2.worst;
  auto g3 = check_gradients([&] { return mul_samples(x, {0.0, 1.25}); }, {{"x", x}});
  EXPECT_LT(g3.max_rel_error, kGradTol) << g3.worst;
}

TEST(Ops, ReductionsAndShapes) {
  Tensor x = rand_t({2, 3, 2, 2}, 1);
  for (auto f : std::vector<std::function<Tensor()>>{
           [&] { return sum(x); }, [&] { return mean(x); }, [&] { return global_avg_pool(x); },
           [&] { return reshape(x, {6, 4}); }, [&] { return permute(x, {3, 1, 0, 2}); },
           [&] { return to_tokens(x); }, [&] { return from_tokens(to_tokens(x), 2, 2); }}) {
    auto gc = check_gradients(f, {{"x", x}});
    EXPECT_LT(gc.max_rel_error, kGradTol) << gc.worst;
  }
}

TEST(Ops, PermuteMatchesIndexOracle) {
  Tensor x = rand_t({2, 3, 4}, 5);
  Tensor y = permute(x, {2, 0, 1});
  ASSERT_EQ(y.shape(), (Shape{4, 2, 3}));
  for (std::int64_t i = 0; i < 2; ++i)
    for (std::int64_t j = 0; j < 3; ++j)
      for (std::int64_t k = 0; k < 4; ++k) EXPECT_EQ(y.at({k, i, j}), x.at({i, j, k}));
}

TEST(Ops, ConcatChannels) {
  Tensor a = rand_t({2, 1, 2, 2}, 1), b = rand_t({2, 3, 2, 2}, 2);
  Tensor y = concat_channels({a, b});
  EXPECT_EQ(y.at({1, 0, 1, 1}), a.at({1, 0, 1, 1}));
  EXPECT_EQ(y.at({1, 3, 0, 1}), b.at({1, 2, 0, 1}));
  auto gc = check_gradients([&] { return concat_channels({a, b}); }, {{"a", a}, {"b", b}});
  EXPECT_LT(gc.max_rel_error, kGradTol) << gc.worst;
}

struct ConvCase {
  std::int64_t cin, cout, k, stride, pad, groups;
  Padding mode;
  bool bias;
};

class ConvOracle : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvOracle, MatchesDirectSummationAndGradients) {
  const auto p = GetParam();
  Tensor x = rand_t({2, p.cin, 5, 6}, 11);
  Tensor w = rand_t({p.cout, p.cin / p.groups, p.k, p.k}, 12);
  Tensor b = rand_t({p.cout}, 13);
  std::optional<Tensor> bias;
  std::vector<double> bvec;
  if (p.bias) {
    bias = b;
    bvec.assign(b.data().begin(), b.data().end());
  }
  const Conv2dOptions opts{p.stride, p.pad, p.groups, p.mode};
  const Tensor y = conv2d(x, w, bias, opts);
  const Tensor ref = testutil::naive_conv2d(x, w, bvec, p.stride, p.pad, p.groups, p.mode == Padding::circular);
  EXPECT_LT(testutil::max_abs_diff(y, ref), 1e-12);

  std::vector<std::pair<std::string, Tensor>> inputs{{"x", x}, {"w", w}};
  if (p.bias) inputs.push_back({"b", b});
  auto gc = check_gradients([&] { return conv2d(x, w, bias, opts); }, inputs);
  EXPECT_LT(gc.max_rel_error, kGradTol) << gc.worst;
}

INSTANTIATE_TEST_SUITE_P(
    Cases, ConvOracle,
    ::testing::Values(ConvCase{3, 4, 3, 1, 1, 1, Padding::zeros, true}, ConvCase{3, 4, 3, 1, 1, 1, Padding::circular, false},
                      ConvCase{4, 4, 5, 1, 2, 4, Padding::zeros, false}, ConvCase{4, 4, 3, 1, 1, 4, Padding::circular, false},
                      ConvCase{3, 2, 3, 2, 1, 1, Padding::zeros, true}, ConvCase{2, 4, 1, 1, 0, 2, Padding::zeros, true},
                      ConvCase{3, 5, 7, 4, 2, 1, Padding::zeros, true}));

TEST(Ops, ConvRejectsBadConfig) {
  Tensor x = rand_t({1, 4, 5, 5}, 1);
  EXPECT_THROW(conv2d(x, rand_t({4, 4, 2, 2}, 2), std::nullopt), ConfigError);
  EXPECT_THROW(conv2d(x, rand_t({4, 2, 3, 3}, 2), std::nullopt, {1, 1, 3, Padding::zeros}), ConfigError);
  EXPECT_THROW(conv2d(x, rand_t({4, 3, 3, 3}, 2), std::nullopt), DimensionError);
}

TEST(Ops, AveragePoolEqualsGroupedConvWithUniformKernel) {
  for (Padding mode : {Padding::zeros, Padding::circular}) {
    for (std::int64_t K : {3, 5}) {
      Tensor x = rand_t({2, 3, 6, 5}, 21);
      Tensor w = Tensor::full({3, 1, K, K}, 1.0 / static_cast<double>(K * K));
      const Tensor pooled = avg_pool2d(x, K, 1, (K - 1) / 2, mode);
      const Tensor conv = conv2d(x, w, std::nullopt, {1, (K - 1) / 2, 3, mode});
      EXPECT_LT(testutil::max_abs_diff(pooled, conv), 1e-12);
      auto gc = check_gradients([&] { return avg_pool2d(x, K, 1, (K - 1) / 2, mode); }, {{"x", x}});
      EXPECT_LT(gc.max_rel_error, kGradTol) << gc.worst;
    }
  }
}

TEST(Ops, LinearAndMatmul) {
  Tensor x = rand_t({2, 3, 4}, 1), w = rand_t({5, 4}, 2), b = rand_t({5}, 3);
  const Tensor y = linear(x, w, b);
  double s = b.at({2});
  for (std::int64_t i = 0; i < 4; ++i) s += x.at({1, 2, i}) * w.at({2, i});
  EXPECT_NEAR(y.at({1, 2, 2}), s, 1e-14);
  auto g1 = check_gradients([&] { return linear(x, w, b); }, {{"x", x}, {"w", w}, {"b", b}});
  EXPECT_LT(g1.max_rel_error, kGradTol) << g1.worst;

  Tensor a = rand_t({2, 3, 4}, 4), c = rand_t({2, 4, 5}, 5), ct = rand_t({2, 5, 4}, 6);
  auto g2 = check_gradients([&] { return matmul(a, c); }, {{"a", a}, {"c", c}});
  EXPECT_LT(g2.max_rel_error, kGradTol) << g2.worst;
  auto g3 = check_gradients([&] { return matmul(a, ct, true); }, {{"a", a}, {"ct", ct}});
  EXPECT_LT(g3.max_rel_error, kGradTol) << g3.worst;
  const Tensor m = matmul(a, ct, true);
  double s2 = 0.0;
  for (std::int64_t k = 0; k < 4; ++k) s2 += a.at({1, 2, k}) * ct.at({1, 3, k});
  EXPECT_NEAR(m.at({1, 2, 3}), s2, 1e-14);
}

TEST(Ops, SoftmaxWithMask) {
  Tensor x = rand_t({2, 3, 4}, 1);
  Tensor mask = Tensor::from({3, 4}, {0, -INFINITY, 0, 0, 0, 0, 0, -INFINITY, -INFINITY, 0, 0, 0});
  const Tensor y = softmax(x, -1, mask);
  EXPECT_EQ(y.at({0, 0, 1}), 0.0);
  double total = 0.0;
  for (std::int64_t k = 0; k < 4; ++k) total += y.at({1, 2, k});
  EXPECT_NEAR(total, 1.0, 1e-15);
  auto gc = check_gradients([&] { return softmax(x, -1, mask); }, {{"x", x}});
  EXPECT_LT(gc.max_rel_error, kGradTol) << gc.worst;
  auto g2 = check_gradients([&] { return softmax(x, 1); }, {{"x", x}});
  EXPECT_LT(g2.max_rel_error, kGradTol) << g2.worst;
}

TEST(Ops, SoftmaxRejectsFullyMaskedRowAndBadMasks) {
  Tensor x = rand_t({2, 3}, 1);
  EXPECT_THROW(softmax(x, -1, Tensor::full({3}, -INFINITY)), ConfigError);
  EXPECT_THROW(softmax(x, -1, Tensor::zeros({2})), DimensionError);
  EXPECT_THROW(softmax(x, -1, Tensor::full({3}, 1.0)), ConfigError);
}

TEST(Ops, LayerNormMatchesOracle) {
  Tensor x = rand_t({2, 5, 2, 3}, 1), g = rand_t({5}, 2), b = rand_t({5}, 3);
  const Tensor y = layer_norm(x, g, b, 1e-6);
  double m = 0.0, v = 0.0;
  for (std::int64_t c = 0; c < 5; ++c) m += x.at({1, c, 1, 2}) / 5;
  for (std::int64_t c = 0; c < 5; ++c) v += (x.at({1, c, 1, 2}) - m) * (x.at({1, c, 1, 2}) - m) / 5;
  EXPECT_NEAR(y.at({1, 3, 1, 2}), (x.at({1, 3, 1, 2}) - m) / std::sqrt(v + 1e-6) * g.at({3}) + b.at({3}), 1e-13);
  auto gc = check_gradients([&] { return layer_norm(x, g, b, 1e-6); }, {{"x", x}, {"g", g}, {"b", b}});
  EXPECT_LT(gc.max_rel_error, kGradTol) << gc.worst;
}

TEST(Ops, Activations) {
  Tensor x = rand_t({3, 4}, 1, -3, 3);
  const Tensor y = gelu(x);
  for (std::int64_t i = 0; i < 4; ++i) {
    const double v = x.at({1, i});
    EXPECT_NEAR(y.at({1, i}), 0.5 * v * (1 + std::erf(v / std::sqrt(2.0))), 1e-15);
  }
  auto g1 = check_gradients([&] { return gelu(x); }, {{"x", x}});
  EXPECT_LT(g1.max_rel_error, kGradTol) << g1.worst;
  auto g2 = check_gradients([&] { return relu(x); }, {{"x", x}});
  EXPECT_LT(g2.max_rel_error, kGradTol) << g2.worst;
}

TEST(Ops, BilinearResizeHandOracle) {
  // 1x2 -> 1x4 with half-pixel centres: sources -0.25 (clamped to 0), 0.25, 0.75, 1.25.
  Tensor x = Tensor::from({1, 1, 1, 2}, {1.0, 3.0});
  const Tensor y = bilinear_resize(x, 1, 4);
  EXPECT_DOUBLE_EQ(y.at({0, 0, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(y.at({0, 0, 0, 1}), 1.5);
  EXPECT_DOUBLE_EQ(y.at({0, 0, 0, 2}), 2.5);
  EXPECT_DOUBLE_EQ(y.at({0, 0, 0, 3}), 3.0);

  Tensor z = rand_t({2, 2, 3, 4}, 9);
  EXPECT_TRUE(testutil::bitwise_equal(bilinear_resize(z, 3, 4), z));
  auto gc = check_gradients([&] { return bilinear_resize(z, 7, 5); }, {{"z", z}});
  EXPECT_LT(gc.max_rel_error, kGradTol) << gc.worst;
  auto g2 = check_gradients([&] { return bilinear_resize(z, 2, 2); }, {{"z", z}});
  EXPECT_LT(g2.max_rel_error, kGradTol) << g2.worst;
}

TEST(Ops, NonFiniteForwardRaisesNumericError) {
  Tensor x = Tensor::from({2}, {1.0, 1e308});
  EXPECT_THROW(scale(x, 10.0), NumericError);
}

TEST(Init, TruncatedNormalStaysWithinTwoSigma) {
  Rng rng(3);
  const Tensor t = trunc_normal({10000}, 0.02, rng);
  double m = 0.0;
  for (double v : t.data()) {
    EXPECT_LE(std::abs(v), 0.04);
    m += v;
  }
  EXPECT_NEAR(m / 10000, 0.0, 1e-3);
}
