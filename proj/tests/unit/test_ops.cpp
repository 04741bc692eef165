// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "tsinpaint/error.hpp"
#include "tsinpaint/ops.hpp"

namespace tsi {
namespace {

using testing::check_gradients;
using testing::probe;
using testing::random_tensor;

constexpr double kGradTol = 1e-5;

double naive_conv(const Tensor& x, const Tensor& w, int n, int co, int oy, int ox, const ConvGeometry& g) {
  double acc = 0.0;
  for (int ci = 0; ci < w.shape().c; ++ci) {
    for (int ky = 0; ky < w.shape().h; ++ky) {
      for (int kx = 0; kx < w.shape().w; ++kx) {
        const int iy = oy * g.stride - g.padding + ky * g.dilation;
        const int ix = ox * g.stride - g.padding + kx * g.dilation;
        if (iy < 0 || ix < 0 || iy >= x.shape().h || ix >= x.shape().w) continue;
        acc += w.at(co, ci, ky, kx) * x.at(n, ci, iy, ix);
      }
    }
  }
  return acc;
}

TEST(Conv2d, MatchesDirectLoopAcrossGeometries) {
  Rng rng(1);
  const Tensor x = random_tensor(Shape{2, 3, 9, 8}, rng);
  for (ConvGeometry g : {ConvGeometry{1, 1, 1}, ConvGeometry{2, 1, 1}, ConvGeometry{1, 2, 2}, ConvGeometry{2, 2, 1}}) {
    for (int k : {1, 3, 4, 5}) {
      const Tensor w = random_tensor(Shape{4, 3, k, k}, rng);
      const Tensor b = random_tensor(Shape{1, 4, 1, 1}, rng);
      const Tensor y = conv2d(Var::constant(x), Var::constant(w), Var::constant(b), g).value();
      ASSERT_EQ(y.shape().h, g.output_size(9, k));
      for (int n = 0; n < 2; ++n) {
        for (int co = 0; co < 4; ++co) {
          for (int oy = 0; oy < y.shape().h; ++oy) {
            for (int ox = 0; ox < y.shape().w; ++ox) {
              ASSERT_NEAR(y.at(n, co, oy, ox), naive_conv(x, w, n, co, oy, ox, g) + b.at(0, co, 0, 0), 1e-12);
            }
          }
        }
      }
    }
  }
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  Rng rng(2);
  for (ConvGeometry g : {ConvGeometry{1, 1, 1}, ConvGeometry{2, 1, 1}, ConvGeometry{1, 2, 2}, ConvGeometry{1, 0, 1}}) {
    const int k = g.padding == 0 ? 1 : (g.stride == 2 ? 4 : 3);
    const auto r = check_gradients(
        [&](const std::vector<Var>& v) { return probe(conv2d(v[0], v[1], v[2], g)); },
        {random_tensor(Shape{2, 3, 6, 6}, rng), random_tensor(Shape{2, 3, k, k}, rng),
         random_tensor(Shape{1, 2, 1, 1}, rng)},
        {"x", "weight", "bias"});
    EXPECT_LT(r.max_rel_error, kGradTol) << r.worst_input << " stride " << g.stride;
  }
}

TEST(Conv2d, RejectsChannelMismatch) {
  EXPECT_THROW(conv2d(Var::constant(Tensor(Shape{1, 2, 4, 4})), Var::constant(Tensor(Shape{1, 3, 3, 3})), Var(), {}),
               InputError);
}

TEST(ElementwiseOps, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  const Shape s{1, 3, 4, 5};
  auto check = [&](const char* name, const std::function<Var(const std::vector<Var>&)>& f, int inputs) {
    std::vector<Tensor> xs;
    for (int i = 0; i < inputs; ++i) xs.push_back(random_tensor(s, rng));
    const auto r = check_gradients(f, xs);
    EXPECT_LT(r.max_rel_error, kGradTol) << name << " " << r.worst_input;
  };
  check("add", [](const auto& v) { return probe(add(v[0], v[1])); }, 2);
  check("sub", [](const auto& v) { return probe(sub(v[0], v[1])); }, 2);
  check("mul", [](const auto& v) { return probe(mul(v[0], v[1])); }, 2);
  check("scale", [](const auto& v) { return probe(scale(v[0], -2.5)); }, 1);
  check("square", [](const auto& v) { return probe(square(v[0])); }, 1);
  check("leaky_relu", [](const auto& v) { return probe(leaky_relu(v[0], 0.2)); }, 1);
  check("sigmoid", [](const auto& v) { return probe(sigmoid(scale(v[0], 4.0))); }, 1);
  check("tanh", [](const auto& v) { return probe(tanh(scale(v[0], 2.0))); }, 1);
  check("clamp", [](const auto& v) { return probe(clamp(scale(v[0], 2.0), -1.0, 1.0)); }, 1);
  check("instance_norm", [](const auto& v) { return probe(instance_norm(v[0], 1e-5)); }, 1);
  check("upsample", [](const auto& v) { return probe(upsample_nearest2x(v[0])); }, 1);
  check("concat", [](const auto& v) { return probe(concat_channels({v[0], v[1]})); }, 2);
  check("channel_mean", [](const auto& v) { return probe(channel_mean(v[0])); }, 1);
  check("channel_max", [](const auto& v) { return probe(channel_max(v[0])); }, 1);
  check("global_avg_pool", [](const auto& v) { return probe(global_avg_pool(v[0])); }, 1);
  check("mean_abs_diff", [](const auto& v) { return mean_abs_diff(v[0], v[1]); }, 2);
  check("gram", [](const auto& v) { return probe(gram_matrix(v[0])); }, 1);
}

TEST(BroadcastOps, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  const Tensor x = random_tensor(Shape{2, 3, 4, 4}, rng);
  auto r = check_gradients([](const auto& v) { return probe(mul_channelwise(v[0], v[1])); },
                           {x, random_tensor(Shape{2, 3, 1, 1}, rng)});
  EXPECT_LT(r.max_rel_error, kGradTol) << r.worst_input;
  r = check_gradients([](const auto& v) { return probe(mul_spatialwise(v[0], v[1])); },
                      {x, random_tensor(Shape{2, 1, 4, 4}, rng)});
  EXPECT_LT(r.max_rel_error, kGradTol) << r.worst_input;
  r = check_gradients([](const auto& v) { return probe(lerp(v[0], v[1], v[2])); },
                      {random_tensor(Shape{}, rng), x, random_tensor(x.shape(), rng)});
  EXPECT_LT(r.max_rel_error, kGradTol) << r.worst_input;
  r = check_gradients([](const auto& v) { return probe(sub_broadcast_scalar(v[0], mean(v[1]))); },
                      {x, random_tensor(Shape{1, 1, 2, 2}, rng)});
  EXPECT_LT(r.max_rel_error, kGradTol) << r.worst_input;
  r = check_gradients([](const auto& v) { return probe(avg_pool2x2(v[0])); }, {x});
  EXPECT_LT(r.max_rel_error, kGradTol) << r.worst_input;
}

TEST(SpectralNormalize, GradientMatchesFiniteDifferencesWithFixedVectors) {
  Rng rng(5);
  Tensor u = random_tensor(Shape{1, 1, 1, 3}, rng);
  Tensor v = random_tensor(Shape{1, 1, 1, 2 * 9}, rng);
  const auto r = check_gradients([&](const auto& in) { return probe(spectral_normalize(in[0], u, v)); },
                                 {random_tensor(Shape{3, 2, 3, 3}, rng)});
  EXPECT_LT(r.max_rel_error, kGradTol);
}

TEST(SpectralNormalize, ZeroWeightPassesThrough) {
  Tensor w(Shape{2, 1, 3, 3}, 0.0);
  const Tensor out = spectral_normalize(Var::constant(w), Tensor(Shape{1, 1, 1, 2}, 1.0),
                                        Tensor(Shape{1, 1, 1, 9}, 1.0)).value();
  for (double x : out.values()) EXPECT_EQ(x, 0.0);
}

TEST(ChannelMax, TiesRouteGradientToFirstMaximum) {
  Var x = Var::leaf(Tensor(Shape{1, 3, 1, 1}, 2.0));
  backward(mean(channel_max(x)));
  EXPECT_EQ(x.grad()[0], 1.0);
  EXPECT_EQ(x.grad()[1], 0.0);
  EXPECT_EQ(x.grad()[2], 0.0);
}

TEST(InstanceNorm, NormalizesEachPlane) {
  Rng rng(6);
  const Tensor y = instance_norm(Var::constant(random_tensor(Shape{2, 3, 5, 5}, rng, -3.0, 7.0)), 0.0).value();
  for (int n = 0; n < 2; ++n) {
    for (int c = 0; c < 3; ++c) {
      double m = 0.0;
      double v = 0.0;
      for (int i = 0; i < 25; ++i) m += y.plane(n, c)[i] / 25.0;
      for (int i = 0; i < 25; ++i) v += (y.plane(n, c)[i] - m) * (y.plane(n, c)[i] - m) / 25.0;
      EXPECT_NEAR(m, 0.0, 1e-12);
      EXPECT_NEAR(v, 1.0, 1e-12);
    }
  }
}

TEST(Sigmoid, StaysFiniteAndInRangeForLargeInputs) {
  Tensor x(Shape{1, 1, 1, 4}, std::vector<double>{-800.0, -30.0, 30.0, 800.0});
  const Tensor y = sigmoid(Var::constant(x)).value();
  EXPECT_TRUE(y.all_finite());
  EXPECT_GE(y[0], 0.0);
  EXPECT_LE(y[3], 1.0);
  EXPECT_GT(y[1], 0.0);
  EXPECT_LT(y[2], 1.0);
}

TEST(Autograd, NoGradGuardRecordsNothing) {
  Var w = Var::leaf(Tensor(Shape{1, 1, 1, 1}, 3.0));
  NoGradGuard guard;
  const Var y = mul(w, w);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Autograd, SharedSubexpressionsAccumulate) {
  Var x = Var::leaf(Tensor(Shape{}, 1.5));
  const Var y = add(mul(x, x), x);  // dy/dx = 2x + 1
  backward(y);
  EXPECT_DOUBLE_EQ(x.grad().item(), 4.0);
}

TEST(Autograd, BackwardRejectsNonScalarRoot) {
  Var x = Var::leaf(Tensor(Shape{1, 1, 2, 2}, 1.0));
  EXPECT_THROW(backward(scale(x, 2.0)), InputError);
}

TEST(FlipHorizontal, IsAnInvolution) {
  Rng rng(7);
  const Tensor x = random_tensor(Shape{2, 3, 4, 5}, rng);
  const Tensor y = flip_horizontal(x);
  EXPECT_EQ(y.at(1, 2, 3, 0), x.at(1, 2, 3, 4));
  const Tensor z = flip_horizontal(y);
  for (std::size_t i = 0; i < x.size(); ++i) ASSERT_EQ(z[i], x[i]);
}

}  // namespace
}  // namespace tsi
