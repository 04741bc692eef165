// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "tsinpaint/data.hpp"
#include "tsinpaint/error.hpp"
#include "tsinpaint/network.hpp"

namespace tsi {
namespace {

using testing::bit_identical;
using testing::random_tensor;

NetworkConfig small_config(int levels) {
  NetworkConfig cfg;
  cfg.levels = levels;
  cfg.base_channels = 4;
  cfg.max_channels = 16;
  cfg.height = 32;
  cfg.width = 32;
  cfg.bottleneck_blocks = 2;
  cfg.disc_base_channels = 4;
  return cfg;
}

Tensor test_mask(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  return generate_irregular_mask(rng, h, w, MaskBin{0.2, 0.4});
}

TEST(Network, ShapeLadderMatchesAcrossStreams) {
  for (int levels : {2, 3, 4}) {
    const NetworkConfig cfg = small_config(levels);
    InpaintingNetwork net(cfg, 1);
    const Tensor img = testing::synthetic_image(3, 32, 32);
    const ForwardResult out = net.forward(img, test_mask(32, 32, 4));
    ASSERT_EQ(out.ms_encoder_features.size(), static_cast<std::size_t>(levels));
    ASSERT_EQ(out.ss_encoder_features.size(), static_cast<std::size_t>(levels));
    ASSERT_EQ(out.detailed_pyramid.size(), static_cast<std::size_t>(levels));
    ASSERT_EQ(out.structure_pyramid.size(), static_cast<std::size_t>(levels));
    for (int l = 1; l <= levels; ++l) {
      const std::size_t i = static_cast<std::size_t>(l - 1);
      const Shape x = out.ms_encoder_features[i].shape();
      EXPECT_EQ(out.ss_encoder_features[i].shape(), x) << "L=" << levels << " l=" << l;
      EXPECT_EQ(x, (Shape{1, cfg.encoder_channels(l), 32 >> l, 32 >> l}));
      EXPECT_EQ(out.ms_decoder_features[i].shape(), out.ss_decoder_features[i].shape());
      EXPECT_EQ(out.detailed_pyramid[i].shape(), (Shape{1, 3, 32 >> (l - 1), 32 >> (l - 1)}));
      EXPECT_EQ(out.structure_pyramid[i].shape(), out.detailed_pyramid[i].shape());
      EXPECT_EQ(out.gate_maps[i].shape(), x);
    }
  }
}

TEST(Network, StructureStreamDoesNotFeedMainEncoder) {
  InpaintingNetwork net(small_config(3), 2);
  const Var img = Var::constant(testing::synthetic_image(5, 32, 32));
  const Var mask = Var::constant(test_mask(32, 32, 6));
  const std::vector<Var> ms = net.ms_encode(img, mask);
  const SsEncoding ss = net.ss_encode(img, mask, ms);

  // Perturb every structure-stream and gate parameter; main encoder features must not move.
  for (ParamEntry& e : net.params().entries()) {
    if (e.name.rfind("ss.", 0) == 0 || e.name.rfind("gu", 0) == 0) {
      for (double& v : e.var.mutable_value().values()) v += 0.5;
    }
  }
  const std::vector<Var> ms_after = net.ms_encode(img, mask);
  const SsEncoding ss_after = net.ss_encode(img, mask, ms_after);
  bool ss_changed = false;
  for (std::size_t l = 0; l < ms.size(); ++l) {
    EXPECT_TRUE(bit_identical(ms[l].value(), ms_after[l].value())) << "level " << l + 1;
    ss_changed = ss_changed || !bit_identical(ss.features[l].value(), ss_after.features[l].value());
  }
  EXPECT_TRUE(ss_changed);
}

TEST(Network, MainFeaturesReachOnlyDeeperStructureLevels) {
  const int levels = 4;
  InpaintingNetwork net(small_config(levels), 3);
  const Var img = Var::constant(testing::synthetic_image(7, 32, 32));
  const Var mask = Var::constant(test_mask(32, 32, 8));
  const std::vector<Var> ms = net.ms_encode(img, mask);
  const SsEncoding base = net.ss_encode(img, mask, ms);
  Rng rng(9);
  for (int l = 1; l <= levels; ++l) {
    std::vector<Var> perturbed = ms;
    Tensor x = ms[static_cast<std::size_t>(l - 1)].value();
    const Tensor noise = random_tensor(x.shape(), rng);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += noise[i];
    perturbed[static_cast<std::size_t>(l - 1)] = Var::constant(x);
    const SsEncoding out = net.ss_encode(img, mask, perturbed);
    for (int m = 1; m <= levels; ++m) {
      const Tensor& a = base.features[static_cast<std::size_t>(m - 1)].value();
      const Tensor& b = out.features[static_cast<std::size_t>(m - 1)].value();
      if (m <= l) {
        EXPECT_TRUE(bit_identical(a, b)) << "X^" << l << " reached S^" << m;
      } else {
        EXPECT_FALSE(bit_identical(a, b)) << "X^" << l << " did not reach S^" << m;
      }
    }
  }
}

TEST(Network, EveryTrainableParameterReceivesGradient) {
  for (ModelVariant variant : {ModelVariant{}, ModelVariant{true, false, false}, ModelVariant{false, true, false},
                               ModelVariant{false, false, true}}) {
    NetworkConfig cfg = small_config(3);
    // Wide enough that no channel-attention MLP starts with every hidden ReLU inactive.
    cfg.base_channels = 32;
    cfg.max_channels = 64;
    cfg.variant = variant;
    InpaintingNetwork net(cfg, 4);
    std::vector<ImageSample> samples;
    for (int i = 0; i < 4; ++i) {
      const Tensor img = testing::synthetic_image(10 + i, 32, 32);
      samples.push_back(make_sample(img, img, test_mask(32, 32, 20 + i), 3));
    }
    const ImageSample batch = collate(samples);
    const ForwardResult out = net.forward(batch.image, batch.mask);
    std::vector<Var> terms;
    for (const Var& p : out.detailed_pyramid) terms.push_back(testing::probe(p, 1));
    for (const Var& p : out.structure_pyramid) terms.push_back(testing::probe(p, 2));
    backward(sum_all(terms));
    for (const ParamEntry& e : net.params().entries()) {
      if (e.kind != ParamKind::kTrainable) continue;
      ASSERT_TRUE(e.var.has_grad()) << e.name;
      const Tensor grad = e.var.grad();
      double norm = 0.0;
      for (double g : grad.values()) norm += g * g;
      EXPECT_GT(norm, 0.0) << e.name << " ms_only=" << variant.ms_only << " no_gu=" << variant.no_gu
                           << " no_afblk=" << variant.no_afblk;
    }
  }
}

TEST(Network, AblationsDropTheirComponents) {
  NetworkConfig cfg = small_config(3);
  cfg.variant.ms_only = true;
  InpaintingNetwork ms_only(cfg, 5);
  const Tensor img = testing::synthetic_image(12, 32, 32);
  const Tensor mask = test_mask(32, 32, 13);
  const ForwardResult a = ms_only.forward(img, mask);
  EXPECT_TRUE(a.structure_pyramid.empty());
  EXPECT_TRUE(a.gate_maps.empty());
  EXPECT_TRUE(ms_only.gated_units().empty());
  EXPECT_TRUE(ms_only.fusion_blocks().empty());

  cfg.variant = ModelVariant{false, true, false};
  InpaintingNetwork no_gu(cfg, 5);
  EXPECT_TRUE(no_gu.forward(img, mask).gate_maps.empty());
  EXPECT_TRUE(no_gu.gated_units().empty());
  EXPECT_LT(no_gu.params().trainable_count(), InpaintingNetwork(small_config(3), 5).params().trainable_count());

  cfg.variant = ModelVariant{false, false, true};
  InpaintingNetwork no_afblk(cfg, 5);
  EXPECT_TRUE(no_afblk.fusion_blocks().empty());
  EXPECT_EQ(no_afblk.forward(img, mask).ms_decoder_features[0].shape(), a.ms_decoder_features[0].shape());
}

TEST(Network, ConstantGateOverrideScalesGatedFeatures) {
  InpaintingNetwork net(small_config(3), 6);
  const Var img = Var::constant(testing::synthetic_image(14, 32, 32));
  const Var mask = Var::constant(test_mask(32, 32, 15));
  const std::vector<Var> ms = net.ms_encode(img, mask);
  ForwardOptions options;
  options.gate_override = 0.25;
  const SsEncoding ss = net.ss_encode(img, mask, ms, options);
  for (std::size_t l = 0; l < ms.size(); ++l) {
    const Tensor& x = ms[l].value();
    const Tensor& o = ss.gated[l].value();
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_EQ(o[i], 0.25 * x[i]);
  }
}

TEST(Network, CompositeKeepsKnownPixels) {
  InpaintingNetwork net(small_config(2), 7);
  const Tensor img = testing::synthetic_image(16, 32, 32);
  const Tensor mask = test_mask(32, 32, 17);
  const ForwardResult out = net.forward(img, mask);
  const Tensor& c = out.composited.value();
  const Tensor& f = out.final_image.value();
  for (int ch = 0; ch < 3; ++ch) {
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        const double expected = mask.at(0, 0, y, x) > 0.5 ? f.at(0, ch, y, x) : img.at(0, ch, y, x);
        ASSERT_EQ(c.at(0, ch, y, x), expected);
      }
    }
  }
  for (double v : f.values()) {
    ASSERT_GE(v, -1.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(Network, RejectsBadConfigurationsAndInputs) {
  NetworkConfig cfg = small_config(3);
  cfg.height = 36;
  EXPECT_THROW(InpaintingNetwork(cfg, 1), ConfigError);
  cfg = small_config(3);
  cfg.base_channels = 6;
  EXPECT_THROW(InpaintingNetwork(cfg, 1), ConfigError);
  cfg = small_config(1);
  EXPECT_THROW(InpaintingNetwork(cfg, 1), ConfigError);

  InpaintingNetwork net(small_config(3), 1);
  const Tensor img = testing::synthetic_image(1, 32, 32);
  EXPECT_THROW((void)net.forward(img, Tensor(Shape{1, 1, 16, 16})), InputError);
  EXPECT_THROW((void)net.forward(testing::synthetic_image(1, 36, 36), Tensor(Shape{1, 1, 36, 36})), ConfigError);
  EXPECT_THROW((void)net.forward(img, Tensor(Shape{1, 1, 32, 32}, 0.5)), InputError);
}

TEST(Network, SameSeedGivesIdenticalWeights) {
  InpaintingNetwork a(small_config(3), 42);
  InpaintingNetwork b(small_config(3), 42);
  InpaintingNetwork c(small_config(3), 43);
  const auto sa = a.params().snapshot();
  const auto sb = b.params().snapshot();
  const auto sc = c.params().snapshot();
  bool differs = false;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    EXPECT_TRUE(bit_identical(sa[i], sb[i]));
    differs = differs || !bit_identical(sa[i], sc[i]);
  }
  EXPECT_TRUE(differs);
}

}  // namespace
}  // namespace tsi
