// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsinpaint/autograd.hpp"
#include "tsinpaint/params.hpp"

namespace tsi {

class TensorContainer;

/// Frozen image-to-features map used by the perceptual and style losses.
///
/// The default is a fixed-seed random convolution pyramid with the VGG16
/// tap layout (one tap per resolution, five taps). `from_vgg16` rebuilds the
/// real VGG16 trunk up to relu5_1 from a tensor container holding
/// `convX_Y.weight` / `convX_Y.bias` entries.
class FeatureExtractor {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x5eed'f00d;

  static FeatureExtractor random_pyramid(std::uint64_t seed = kDefaultSeed);
  /// Single stage phi(x) = x.
  static FeatureExtractor identity();
  static FeatureExtractor from_vgg16(const TensorContainer& weights);

  /// Feature maps of every tap, shallowest first.
  [[nodiscard]] std::vector<Var> operator()(const Var& image) const;

  [[nodiscard]] std::size_t stage_count() const { return tap_count_; }
  [[nodiscard]] const ParamStore& params() const { return store_; }

 private:
  struct Layer {
    enum class Kind { kConv, kPool } kind = Kind::kConv;
    Var weight;
    Var bias;
    bool tap = false;
  };

  ParamStore store_;
  std::vector<Layer> layers_;
  std::size_t tap_count_ = 0;
  bool imagenet_input_ = false;
};

struct LossWeights {
  double pyramid = 1.0;
  double perceptual = 0.1;
  double style = 250.0;
  double adversarial = 0.1;
};

/// Sum over levels of mean |clamp(pred, -1, 1) - gt| for the detailed and the
/// structure pyramid. `structure` may be empty (main-stream-only model), in
/// which case `structure_gt` is ignored.
Var pyramid_loss(const std::vector<Var>& detailed, const std::vector<Var>& structure,
                 const std::vector<Tensor>& detailed_gt, const std::vector<Tensor>& structure_gt);

/// sum_i mean |phi_i(pred) - phi_i(gt)|.
Var perceptual_loss(const FeatureExtractor& extractor, const Var& pred, const Tensor& gt);

/// sum_i mean |G(phi_i(pred)) - G(phi_i(gt))|.
Var style_loss(const FeatureExtractor& extractor, const Var& pred, const Tensor& gt);

/// Both losses on precomputed taps, so one extractor pass can serve both.
Var perceptual_loss(const std::vector<Var>& pred_features, const std::vector<Tensor>& gt_features);
Var style_loss(const std::vector<Var>& pred_features, const std::vector<Tensor>& gt_features);
/// Extractor taps of `image` without recording a graph.
std::vector<Tensor> frozen_features(const FeatureExtractor& extractor, const Tensor& image);

struct AdversarialLosses {
  Var generator;
  Var discriminator;
};

/// Relativistic average least-squares pair on raw patch scores.
AdversarialLosses adversarial_losses(const Var& d_real, const Var& d_fake);

struct LossComponents {
  Var pyramid;
  Var perceptual_ms;
  Var perceptual_ss;  // may be undefined (main-stream-only)
  Var style;
  Var adversarial_g;
};

struct LossReport {
  double l_py = 0.0;
  double l_per_ms = 0.0;
  double l_per_ss = 0.0;
  double l_sty = 0.0;
  double l_adv_g = 0.0;
  double l_adv_d = 0.0;
  double total_g = 0.0;
  double total_d = 0.0;
};

struct Objective {
  Var generator_total;
  LossReport report;
};

/// Weighted generator objective. Throws TrainingError naming the first
/// non-finite component.
Objective total_losses(const LossWeights& weights, const LossComponents& components);

}  // namespace tsi
