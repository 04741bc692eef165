// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "test_support.hpp"
#include "tsinpaint/error.hpp"
#include "tsinpaint/losses.hpp"
#include "tsinpaint/ops.hpp"

namespace tsi {
namespace {

using testing::check_gradients;
using testing::random_tensor;

constexpr double kOracleTol = 1e-10;
constexpr double kGradTol = 1e-5;

using oracle::clamped_l1;
using oracle::gram;
using oracle::mean_abs;

TEST(PyramidLoss, MatchesScalarLoop) {
  Rng rng(30);
  std::vector<Var> dp, sp;
  std::vector<Tensor> dg, sg;
  double expected = 0.0;
  for (int l = 0; l < 4; ++l) {
    const Shape s{2, 3, 32 >> l, 32 >> l};
    const Tensor a = random_tensor(s, rng, -1.5, 1.5);
    const Tensor b = random_tensor(s, rng, -1.5, 1.5);
    const Tensor ga = random_tensor(s, rng);
    const Tensor gb = random_tensor(s, rng);
    dp.push_back(Var::constant(a));
    sp.push_back(Var::constant(b));
    dg.push_back(ga);
    sg.push_back(gb);
    expected += clamped_l1(a, ga) + clamped_l1(b, gb);
  }
  EXPECT_NEAR(pyramid_loss(dp, sp, dg, sg).value().item(), expected, kOracleTol);
}

TEST(PyramidLoss, MainStreamOnlyIgnoresStructureTerms) {
  Rng rng(31);
  const Tensor a = random_tensor(Shape{1, 3, 8, 8}, rng);
  const Tensor g = random_tensor(Shape{1, 3, 8, 8}, rng);
  EXPECT_NEAR(pyramid_loss({Var::constant(a)}, {}, {g}, {}).value().item(), clamped_l1(a, g), kOracleTol);
}

TEST(PyramidLoss, RejectsScaleMismatch) {
  EXPECT_THROW(pyramid_loss({Var::constant(Tensor(Shape{1, 3, 8, 8}))}, {}, {Tensor(Shape{1, 3, 4, 4})}, {}),
               InputError);
  EXPECT_THROW(pyramid_loss({}, {}, {}, {}), InputError);
}

TEST(PerceptualLoss, MatchesScalarLoop) {
  const FeatureExtractor fx = FeatureExtractor::random_pyramid();
  Rng rng(32);
  const Tensor pred = random_tensor(Shape{2, 3, 16, 16}, rng);
  const Tensor gt = random_tensor(Shape{2, 3, 16, 16}, rng);
  EXPECT_NEAR(perceptual_loss(fx, Var::constant(pred), gt).value().item(), oracle::perceptual(fx, pred, gt),
              kOracleTol);
}

TEST(StyleLoss, MatchesScalarLoop) {
  const FeatureExtractor fx = FeatureExtractor::random_pyramid();
  Rng rng(33);
  const Tensor pred = random_tensor(Shape{2, 3, 16, 16}, rng);
  const Tensor gt = random_tensor(Shape{2, 3, 16, 16}, rng);
  EXPECT_NEAR(style_loss(fx, Var::constant(pred), gt).value().item(), oracle::style(fx, pred, gt), kOracleTol);
}

TEST(StyleLoss, IdentityExtractorReducesToGramDistance) {
  const FeatureExtractor fx = FeatureExtractor::identity();
  Rng rng(34);
  const Tensor pred = random_tensor(Shape{1, 3, 5, 7}, rng);
  const Tensor gt = random_tensor(Shape{1, 3, 5, 7}, rng);
  EXPECT_NEAR(style_loss(fx, Var::constant(pred), gt).value().item(),
              mean_abs(gram(pred), gram(gt)), kOracleTol);
  EXPECT_NEAR(perceptual_loss(fx, Var::constant(pred), gt).value().item(), mean_abs(pred, gt), kOracleTol);
}

TEST(GramMatrix, IsSymmetricPositiveSemidefinite) {
  Rng rng(35);
  const Tensor f = random_tensor(Shape{2, 6, 4, 5}, rng);
  const Tensor g = gram_matrix(Var::constant(f)).value();
  const Tensor ref = gram(f);
  for (int n = 0; n < 2; ++n) {
    Eigen::MatrixXd m(6, 6);
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) {
        EXPECT_NEAR(g.at(n, 0, a, b), ref.at(n, 0, a, b), kOracleTol);
        EXPECT_EQ(g.at(n, 0, a, b), g.at(n, 0, b, a));
        m(a, b) = g.at(n, 0, a, b);
      }
    }
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(AdversarialLoss, ConstantScoresGiveExactValues) {
  const AdversarialLosses l = adversarial_losses(Var::constant(Tensor(Shape{2, 1, 3, 3}, 1.0)),
                                                 Var::constant(Tensor(Shape{2, 1, 3, 3}, -1.0)));
  EXPECT_EQ(l.discriminator.value().item(), 2.0);
  EXPECT_EQ(l.generator.value().item(), 18.0);
}

TEST(AdversarialLoss, MatchesScalarLoop) {
  Rng rng(36);
  const Tensor r = random_tensor(Shape{2, 1, 3, 3}, rng, -2.0, 2.0);
  const Tensor f = random_tensor(Shape{2, 1, 3, 3}, rng, -2.0, 2.0);
  const oracle::RaLsgan ref = oracle::ralsgan(r, f);
  const AdversarialLosses l = adversarial_losses(Var::constant(r), Var::constant(f));
  EXPECT_NEAR(l.discriminator.value().item(), ref.discriminator, kOracleTol);
  EXPECT_NEAR(l.generator.value().item(), ref.generator, kOracleTol);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  Rng rng(37);
  const Tensor gt = random_tensor(Shape{1, 3, 8, 8}, rng);
  const FeatureExtractor fx = FeatureExtractor::random_pyramid();
  auto check = [&](const char* name, const std::function<Var(const std::vector<Var>&)>& f, std::vector<Tensor> in) {
    const auto r = check_gradients(f, in);
    EXPECT_LT(r.max_rel_error, kGradTol) << name << " " << r.worst_input;
  };
  check("pyramid",
        [&](const auto& v) {
          return pyramid_loss({v[0], v[1]}, {v[2]}, {gt, avg_pool2x2(gt)}, {gt});
        },
        {random_tensor(Shape{1, 3, 8, 8}, rng, -0.9, 0.9), random_tensor(Shape{1, 3, 4, 4}, rng, -0.9, 0.9),
         random_tensor(Shape{1, 3, 8, 8}, rng, -0.9, 0.9)});
  check("perceptual", [&](const auto& v) { return perceptual_loss(fx, v[0], gt); },
        {random_tensor(Shape{1, 3, 8, 8}, rng)});
  check("style", [&](const auto& v) { return style_loss(fx, v[0], gt); }, {random_tensor(Shape{1, 3, 8, 8}, rng)});
  check("adversarial_d", [](const auto& v) { return adversarial_losses(v[0], v[1]).discriminator; },
        {random_tensor(Shape{1, 1, 2, 2}, rng), random_tensor(Shape{1, 1, 2, 2}, rng)});
  check("adversarial_g", [](const auto& v) { return adversarial_losses(v[0], v[1]).generator; },
        {random_tensor(Shape{1, 1, 2, 2}, rng), random_tensor(Shape{1, 1, 2, 2}, rng)});
  check("total",
        [&](const auto& v) {
          LossComponents c;
          c.pyramid = mean(square(v[0]));
          c.perceptual_ms = mean(v[0]);
          c.perceptual_ss = mean(mul(v[0], v[0]));
          c.style = mean(scale(v[0], 3.0));
          c.adversarial_g = mean(square(add_scalar(v[0], 1.0)));
          return total_losses(LossWeights{}, c).generator_total;
        },
        {random_tensor(Shape{1, 1, 2, 2}, rng)});
}

TEST(TotalLoss, WeightsEveryTerm) {
  LossComponents c;
  c.pyramid = Var::constant(Tensor::scalar(0.5));
  c.perceptual_ms = Var::constant(Tensor::scalar(2.0));
  c.perceptual_ss = Var::constant(Tensor::scalar(3.0));
  c.style = Var::constant(Tensor::scalar(0.01));
  c.adversarial_g = Var::constant(Tensor::scalar(4.0));
  const LossWeights w{1.5, 0.2, 100.0, 0.25};
  const Objective o = total_losses(w, c);
  const double expected = 1.5 * 0.5 + 0.2 * (2.0 + 3.0) + 100.0 * 0.01 + 0.25 * 4.0;
  EXPECT_NEAR(o.generator_total.value().item(), expected, 1e-14);
  EXPECT_NEAR(o.report.total_g, expected, 1e-14);
  EXPECT_EQ(o.report.l_per_ss, 3.0);

  c.perceptual_ss = Var();
  EXPECT_NEAR(total_losses(w, c).report.total_g, expected - 0.2 * 3.0, 1e-14);
}

TEST(TotalLoss, NamesNonFiniteTerm) {
  LossComponents c;
  c.pyramid = Var::constant(Tensor::scalar(1.0));
  c.style = Var::constant(Tensor::scalar(std::nan("")));
  try {
    (void)total_losses(LossWeights{}, c);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("l_sty"), std::string::npos);
  }
}

TEST(FeatureExtractor, RandomPyramidIsDeterministicAndFrozen) {
  const FeatureExtractor a = FeatureExtractor::random_pyramid();
  const FeatureExtractor b = FeatureExtractor::random_pyramid();
  ASSERT_EQ(a.stage_count(), 5u);
  EXPECT_EQ(a.params().trainable_count(), 0u);
  for (std::size_t i = 0; i < a.params().entries().size(); ++i) {
    EXPECT_TRUE(testing::bit_identical(a.params().entries()[i].var.value(), b.params().entries()[i].var.value()));
  }
}

}  // namespace
}  // namespace tsi
