#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "p2p/autodiff/adam.hpp"
#include "p2p/autodiff/checkpoint.hpp"
#include "p2p/autodiff/grad_check.hpp"
#include "p2p/autodiff/ops.hpp"
#include "p2p/error.hpp"
#include "test_util.hpp"

namespace p2p {
namespace {

using ad::Tensor;
using T = Tensor<double>;
using test::param;

T constant(ad::Shape s, std::vector<double> v) { return T::constant(std::move(s), std::move(v)); }

// Scalar probe with fixed random weights so every output element matters.
T probe(const T& y, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  const auto w = test::random_values(y.size(), rng);
  return ad::weighted_sum(y, std::span<const double>(w));
}

double check(const std::function<T()>& loss, std::vector<ad::Parameter<double>>& params) {
  const auto report = ad::grad_check(loss, params);
  EXPECT_TRUE(report.all_finite);
  EXPECT_GT(report.entries_checked, 0u);
  return report.max_relative_error;
}

TEST(FullyConnected, IdentityWeights) {
  const auto y = ad::fully_connected(constant({1, 2}, {1, 2}), constant({2, 2}, {1, 0, 0, 1}), constant({2}, {0, 0}));
  EXPECT_EQ(y.shape(), (ad::Shape{1, 2}));
  EXPECT_DOUBLE_EQ(y.data()[0], 1.0);
  EXPECT_DOUBLE_EQ(y.data()[1], 2.0);
}

TEST(FullyConnected, SumPlusBias) {
  const auto y = ad::fully_connected(constant({1, 2}, {1, 1}), constant({2, 1}, {1, 1}), constant({1}, {1}));
  EXPECT_DOUBLE_EQ(y.item(), 3.0);
}

TEST(FullyConnected, ShapeMismatchIsDimensionError) {
  EXPECT_THROW(ad::fully_connected(constant({1, 3}, {1, 2, 3}), constant({2, 1}, {1, 1}), constant({1}, {0})),
               DimensionError);
}

TEST(FullyConnected, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  std::vector<ad::Parameter<double>> p{param("x", {2, 3}, rng), param("w", {3, 4}, rng), param("b", {4}, rng)};
  EXPECT_LT(check([&] { return probe(ad::fully_connected(p[0].tensor, p[1].tensor, p[2].tensor)); }, p), 1e-6);
}

TEST(SeparableConv, DeltaKernelPassesInputThrough) {
  std::mt19937_64 rng(2);
  const auto x = constant({1, 4, 3, 2}, test::random_values(24, rng));
  std::vector<double> delta(3 * 3 * 2, 0.0);
  delta[(1 * 3 + 1) * 2 + 0] = 1.0;
  delta[(1 * 3 + 1) * 2 + 1] = 1.0;
  const auto y = ad::separable_conv2d(x, constant({3, 3, 2}, delta), constant({2, 2}, {1, 0, 0, 1}),
                                      constant({2}, {0, 0}));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y.data()[i], x.data()[i]);
}

TEST(SeparableConv, OnesKernelCountsNeighboursWithZeroPadding) {
  const auto y = ad::separable_conv2d(constant({1, 3, 3, 1}, std::vector<double>(9, 1.0)),
                                      constant({3, 3, 1}, std::vector<double>(9, 1.0)), constant({1, 1}, {1}),
                                      constant({1}, {0}));
  EXPECT_DOUBLE_EQ(y.data()[4], 9.0);
  EXPECT_DOUBLE_EQ(y.data()[0], 4.0);
  EXPECT_DOUBLE_EQ(y.data()[8], 4.0);
  EXPECT_DOUBLE_EQ(y.data()[1], 6.0);
}

TEST(SeparableConv, EvenKernelIsConfigError) {
  EXPECT_THROW(ad::separable_conv2d(constant({1, 3, 3, 1}, std::vector<double>(9, 1.0)),
                                    constant({2, 2, 1}, std::vector<double>(4, 1.0)), constant({1, 1}, {1}),
                                    constant({1}, {0})),
               ConfigError);
}

TEST(SeparableConv, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (std::size_t k : {3u, 5u}) {
    std::vector<ad::Parameter<double>> p{param("x", {1, 4, 3, 2}, rng), param("dw", {k, k, 2}, rng),
                                         param("pw", {2, 3}, rng), param("b", {3}, rng)};
    EXPECT_LT(check([&] { return probe(ad::separable_conv2d(p[0].tensor, p[1].tensor, p[2].tensor, p[3].tensor)); },
                    p),
              1e-6)
        << "k=" << k;
  }
}

TEST(DepthwiseConv, GradientOnWideChannelBlock) {
  // More channels than one vectorized block, odd remainder.
  std::mt19937_64 rng(4);
  std::vector<ad::Parameter<double>> p{param("x", {2, 3, 4, 37}, rng), param("k", {3, 3, 37}, rng)};
  ad::GradCheckOptions opt;
  opt.max_entries_per_parameter = 120;
  const auto r = ad::grad_check([&] { return probe(ad::depthwise_conv2d(p[0].tensor, p[1].tensor)); }, p, opt);
  EXPECT_LT(r.max_relative_error, 1e-5);
}

TEST(Conv1x1, IdentityAndChannelSum) {
  std::mt19937_64 rng(5);
  const auto x = constant({1, 2, 2, 2}, test::random_values(8, rng));
  const auto same = ad::conv2d_1x1(x, constant({2, 2}, {1, 0, 0, 1}), constant({2}, {0, 0}));
  for (std::size_t i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(same.data()[i], x.data()[i]);
  const auto sum = ad::conv2d_1x1(x, constant({2, 1}, {1, 1}), constant({1}, {0}));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(sum.data()[i], x.data()[2 * i] + x.data()[2 * i + 1]);
}

TEST(Conv1x1, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  std::vector<ad::Parameter<double>> p{param("x", {2, 3, 2, 3}, rng), param("w", {3, 4}, rng), param("b", {4}, rng)};
  EXPECT_LT(check([&] { return probe(ad::conv2d_1x1(p[0].tensor, p[1].tensor, p[2].tensor)); }, p), 1e-6);
}

TEST(Conv2d, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::vector<ad::Parameter<double>> p{param("x", {2, 4, 3, 3}, rng), param("k", {3, 3, 3, 2}, rng),
                                       param("b", {2}, rng)};
  EXPECT_LT(check([&] { return probe(ad::conv2d(p[0].tensor, p[1].tensor, p[2].tensor)); }, p), 1e-6);
}

TEST(Upsample, ReplicatesAndKeepsIdentity) {
  const auto y = ad::upsample_nearest2d(constant({1, 1, 1, 1}, {1}), {2, 2});
  EXPECT_EQ(y.shape(), (ad::Shape{1, 2, 2, 1}));
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 1.0);

  std::mt19937_64 rng(8);
  const auto x = constant({1, 4, 3, 2}, test::random_values(24, rng));
  const auto id = ad::upsample_nearest2d(x, {1, 1});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(id.data()[i], x.data()[i]);
  EXPECT_EQ(ad::upsample_nearest2d(x, {2, 1}).shape(), (ad::Shape{1, 8, 3, 2}));
}

TEST(Upsample, AveragePoolingRecoversInput) {
  std::mt19937_64 rng(9);
  const std::size_t H = 3, W = 2, C = 2, sy = 2, sx = 3;
  const auto x = constant({1, H, W, C}, test::random_values(H * W * C, rng));
  const auto u = ad::upsample_nearest2d(x, {sy, sx});
  const std::size_t UW = W * sx;
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < W; ++w)
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t dy = 0; dy < sy; ++dy)
          for (std::size_t dx = 0; dx < sx; ++dx) acc += u.data()[((h * sy + dy) * UW + w * sx + dx) * C + c];
        EXPECT_DOUBLE_EQ(acc / (sy * sx), x.data()[(h * W + w) * C + c]);
      }
}

TEST(Upsample, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  std::vector<ad::Parameter<double>> p{param("x", {2, 2, 3, 2}, rng)};
  EXPECT_LT(check([&] { return probe(ad::upsample_nearest2d(p[0].tensor, {2, 2})); }, p), 1e-6);
}

TEST(BatchNorm, ConstantChannelNormalizesToZero) {
  ad::BatchNormState<double> st(2);
  const auto y = ad::batch_norm2d(constant({2, 2, 2, 2}, std::vector<double>(16, 3.5)), constant({2}, {1, 1}),
                                  constant({2}, {0, 0}), st, ad::Mode::train);
  for (double v : y.data()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(BatchNorm, ZeroGammaGivesBeta) {
  std::mt19937_64 rng(11);
  ad::BatchNormState<double> st(2);
  const auto y = ad::batch_norm2d(constant({2, 2, 2, 2}, test::random_values(16, rng)), constant({2}, {0, 0}),
                                  constant({2}, {0.25, -1.5}), st, ad::Mode::train);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_DOUBLE_EQ(y.data()[i], i % 2 ? -1.5 : 0.25);
}

TEST(BatchNorm, TrainOutputHasUnitStatistics) {
  std::mt19937_64 rng(12);
  const std::size_t C = 3, n = 4 * 5 * 6;
  ad::BatchNormState<double> st(C);
  const auto y = ad::batch_norm2d(constant({4, 5, 6, C}, test::random_values(n * C, rng, -3.0, 7.0)),
                                  constant({C}, {1, 1, 1}), constant({C}, {0, 0, 0}), st, ad::Mode::train);
  for (std::size_t c = 0; c < C; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += y.data()[i * C + c];
    mean /= n;
    for (std::size_t i = 0; i < n; ++i) var += std::pow(y.data()[i * C + c] - mean, 2);
    var /= n;
    EXPECT_NEAR(mean, 0.0, 1e-5);
    EXPECT_NEAR(var, 1.0, 1e-5);
  }
}

TEST(BatchNorm, EvalBeforeTrainingUsesInitialStatistics) {
  std::mt19937_64 rng(13);
  ad::BatchNormState<double> st(1);
  const auto x = constant({1, 2, 2, 1}, test::random_values(4, rng));
  const auto y = ad::batch_norm2d(x, constant({1}, {1}), constant({1}, {0}), st, ad::Mode::eval);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y.data()[i], x.data()[i] / std::sqrt(1.0 + 1e-5), 1e-12);
}

TEST(BatchNorm, GradientMatchesFiniteDifferencesInBothModes) {
  std::mt19937_64 rng(14);
  for (auto mode : {ad::Mode::train, ad::Mode::eval}) {
    ad::BatchNormState<double> st(3);
    st.running_mean = {0.1, -0.2, 0.3};
    st.running_var = {0.5, 1.5, 2.0};
    std::vector<ad::Parameter<double>> p{param("x", {2, 3, 2, 3}, rng), param("g", {3}, rng, 0.5, 1.5),
                                         param("b", {3}, rng)};
    EXPECT_LT(check([&] { return probe(ad::batch_norm2d(p[0].tensor, p[1].tensor, p[2].tensor, st, mode)); }, p),
              1e-6);
  }
}

TEST(SpatialDropout, IdentityCases) {
  std::mt19937_64 rng(15);
  const auto x = constant({2, 2, 2, 3}, test::random_values(24, rng));
  const auto a = ad::spatial_dropout(x, 0.0, ad::Mode::train, rng);
  const auto b = ad::spatial_dropout(x, 0.7, ad::Mode::eval, rng);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_DOUBLE_EQ(a.data()[i], x.data()[i]);
    EXPECT_DOUBLE_EQ(b.data()[i], x.data()[i]);
  }
}

TEST(SpatialDropout, DropsWholeChannelsAtTheRequestedRate) {
  std::mt19937_64 rng(16);
  const std::size_t C = 10000;
  const auto y = ad::spatial_dropout(constant({1, 2, 1, C}, std::vector<double>(2 * C, 1.0)), 0.5, ad::Mode::train,
                                     rng);
  std::size_t dropped = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const double top = y.data()[c];
    const double bottom = y.data()[C + c];
    ASSERT_EQ(top, bottom);  // whole feature map shares the decision
    if (top == 0.0) {
      ++dropped;
    } else {
      EXPECT_DOUBLE_EQ(top, 2.0);
    }
  }
  EXPECT_NEAR(static_cast<double>(dropped) / C, 0.5, 0.02);
}

TEST(SpatialDropout, RateOfOneIsConfigError) {
  std::mt19937_64 rng(17);
  EXPECT_THROW(ad::spatial_dropout(constant({1, 1, 1, 1}, {1}), 1.0, ad::Mode::train, rng), ConfigError);
}

TEST(SpatialDropout, GradientWithFixedMask) {
  std::mt19937_64 init(18);
  std::vector<ad::Parameter<double>> p{param("x", {2, 2, 2, 4}, init)};
  EXPECT_LT(check(
                [&] {
                  std::mt19937_64 rng(99);
                  return probe(ad::spatial_dropout(p[0].tensor, 0.4, ad::Mode::train, rng));
                },
                p),
            1e-6);
}

TEST(LeakyRelu, SlopeDefinition) {
  const auto y = ad::leaky_relu(constant({3}, {1.0, -1.0, 0.0}), 0.2);
  EXPECT_DOUBLE_EQ(y.data()[0], 1.0);
  EXPECT_DOUBLE_EQ(y.data()[1], -0.2);
  EXPECT_DOUBLE_EQ(y.data()[2], 0.0);
}

TEST(LeakyRelu, GradientAwayFromZero) {
  std::mt19937_64 rng(19);
  auto v = test::random_values(20, rng);
  for (auto& x : v) x += x >= 0 ? 0.1 : -0.1;
  std::vector<ad::Parameter<double>> p{{"x", T::leaf({4, 5}, v, true)}};
  EXPECT_LT(check([&] { return probe(ad::leaky_relu(p[0].tensor, 0.2)); }, p), 1e-6);
}

TEST(Sigmoid, ValuesAndSaturation) {
  const auto y = ad::sigmoid(constant({3}, {0.0, 50.0, -800.0}));
  EXPECT_DOUBLE_EQ(y.data()[0], 0.5);
  EXPECT_NEAR(y.data()[1], 1.0, 1e-9);
  EXPECT_TRUE(std::isfinite(y.data()[2]));
  EXPECT_GE(y.data()[2], 0.0);
}

TEST(Sigmoid, GradientIsYTimesOneMinusY) {
  std::mt19937_64 rng(20);
  std::vector<ad::Parameter<double>> p{param("x", {3, 4}, rng, -4.0, 4.0)};
  EXPECT_LT(check([&] { return probe(ad::sigmoid(p[0].tensor)); }, p), 1e-6);
  const auto y = ad::sigmoid(p[0].tensor);
  ad::weighted_sum(y, std::span<const double>(std::vector<double>(12, 1.0))).backward();
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_NEAR(p[0].tensor.grad()[i], y.data()[i] * (1.0 - y.data()[i]), 1e-15);
  }
}

TEST(MseLoss, HandValues) {
  EXPECT_DOUBLE_EQ(ad::mse_loss(constant({2}, {0, 2}), constant({2}, {0, 0})).item(), 2.0);
  EXPECT_DOUBLE_EQ(ad::mse_loss(constant({2}, {1, 2}), constant({2}, {1, 2})).item(), 0.0);
  EXPECT_THROW(ad::mse_loss(constant({2}, {0, 2}), constant({1}, {0})), DimensionError);
}

TEST(MseLoss, GradientIsTwiceResidualOverN) {
  std::mt19937_64 rng(21);
  std::vector<ad::Parameter<double>> p{param("x", {2, 5}, rng)};
  const auto target = constant({2, 5}, test::random_values(10, rng));
  EXPECT_LT(check([&] { return ad::mse_loss(p[0].tensor, target); }, p), 1e-6);
  ad::mse_loss(p[0].tensor, target).backward();
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_NEAR(p[0].tensor.grad()[i], 2.0 * (p[0].tensor.data()[i] - target.data()[i]) / 10.0, 1e-15);
  }
}

TEST(ShapeOps, CropReshapeMaskScaleAddGradients) {
  std::mt19937_64 rng(22);
  std::vector<ad::Parameter<double>> p{param("x", {2, 4, 3, 2}, rng), param("y", {2, 3, 2, 2}, rng)};
  const auto mask = test::random_values(12, rng, 0.0, 1.0);
  EXPECT_LT(check(
                [&] {
                  const auto c = ad::crop2d(p[0].tensor, 3, 2);
                  const auto s = ad::add(ad::scale(c, 0.37), p[1].tensor);
                  const auto m = ad::multiply_mask(s, std::span<const double>(mask));
                  return probe(ad::reshape(m, {2, 12}));
                },
                p),
            1e-6);
}

TEST(ShapeOps, CropKeepsTopLeftWindow) {
  const auto y = ad::crop2d(constant({1, 3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9}), 2, 2);
  EXPECT_EQ(y.shape(), (ad::Shape{1, 2, 2, 1}));
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{1, 2, 4, 5}));
}

TEST(Tensor, NonFiniteForwardIsNumericalError) {
  EXPECT_THROW(ad::fully_connected(constant({1, 1}, {1e308}), constant({1, 1}, {1e308}), constant({1}, {0})),
               NumericalError);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradient) {
  for (double g : {0.3, -2.0, 1e-4}) {
    auto w = T::leaf({1}, {1.0}, true);
    std::vector<ad::Parameter<double>> p{{"w", w}};
    ad::weighted_sum(w, std::span<const double>(std::vector<double>{g})).backward();
    ad::AdamState st;
    st.learning_rate = 0.01;
    ad::adam_step<double>(p, st);
    EXPECT_NEAR(w.data()[0] - 1.0, -0.01 * (g > 0 ? 1.0 : -1.0), 1e-5) << "g=" << g;
    EXPECT_EQ(st.step, 1u);
  }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  auto w = T::leaf({3}, {1.0, -2.0, 0.5}, true);
  std::vector<ad::Parameter<double>> p{{"w", w}};
  ad::AdamState st;
  for (int i = 0; i < 5; ++i) {
    ad::weighted_sum(w, std::span<const double>(std::vector<double>(3, 0.0))).backward();
    ad::adam_step<double>(p, st);
  }
  EXPECT_EQ(std::vector<double>(w.data().begin(), w.data().end()), (std::vector<double>{1.0, -2.0, 0.5}));
}

TEST(Adam, MinimizesAQuadratic) {
  auto w = T::leaf({1}, {0.0}, true);
  std::vector<ad::Parameter<double>> p{{"w", w}};
  ad::AdamState st;
  st.learning_rate = 0.1;
  for (int i = 0; i < 50; ++i) {
    ad::mse_loss(w, constant({1}, {3.0})).backward();
    ad::adam_step<double>(p, st);
  }
  EXPECT_LT(std::abs(w.data()[0] - 3.0), 3.0);
  EXPECT_LT(std::abs(w.data()[0] - 3.0), 1.0);
}

TEST(Adam, MissingGradientIsAnError) {
  std::vector<ad::Parameter<double>> p{{"w", T::leaf({1}, {0.0}, true)}};
  ad::AdamState st;
  EXPECT_THROW(ad::adam_step<double>(p, st), DataError);
}

TEST(GradCheck, SingleFullyConnectedLayerIsExact) {
  std::mt19937_64 rng(23);
  std::vector<ad::Parameter<double>> p{param("w", {3, 2}, rng), param("b", {2}, rng)};
  const auto x = constant({2, 3}, test::random_values(6, rng));
  const auto r = ad::grad_check([&] { return probe(ad::fully_connected(x, p[0].tensor, p[1].tensor)); }, p);
  EXPECT_LT(r.max_relative_error, 1e-6);
  EXPECT_EQ(r.entries_checked, 8u);
}

TEST(Checkpoint, RoundTripsTensorsAndOptimizer) {
  test::TempDir dir("ckpt");
  ad::Checkpoint cp;
  cp.tensors.push_back({"a.weight", {2, 3}, {1, 2, 3, 4, 5, 6.5f}});
  cp.tensors.push_back({"a.bias", {3}, {-1, 0, 1}});
  ad::AdamState st;
  st.step = 7;
  st.learning_rate = 1e-5;
  st.m = {{0.5, 0.25}, {1.0}};
  st.v = {{0.125, 2.0}, {4.0}};
  cp.optimizer = st;
  ad::write_checkpoint(dir.path() / "c.p2p", cp);
  const auto back = ad::read_checkpoint(dir.path() / "c.p2p");
  ASSERT_EQ(back.tensors.size(), 2u);
  EXPECT_EQ(back.tensors[0].name, "a.weight");
  EXPECT_EQ(back.tensors[0].shape, (ad::Shape{2, 3}));
  EXPECT_EQ(back.tensors[0].values, cp.tensors[0].values);
  ASSERT_TRUE(back.optimizer);
  EXPECT_EQ(back.optimizer->step, 7u);
  EXPECT_EQ(back.optimizer->m, st.m);
  EXPECT_EQ(back.optimizer->v, st.v);
}

}  // namespace
}  // namespace p2p
