// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsinpaint/losses.hpp"

#include <cmath>

#include "tsinpaint/container.hpp"
#include "tsinpaint/error.hpp"
#include "tsinpaint/ops.hpp"
#include "tsinpaint/rng.hpp"

namespace tsi {

FeatureExtractor FeatureExtractor::random_pyramid(std::uint64_t seed) {
  FeatureExtractor fx;
  Rng rng(seed);
  const int widths[] = {16, 32, 64, 64, 64};
  int in = 3;
  for (int stage = 0; stage < 5; ++stage) {
    if (stage > 0) fx.layers_.push_back(Layer{Layer::Kind::kPool, {}, {}, false});
    Tensor w(Shape{widths[stage], in, 3, 3});
    const double stddev = std::sqrt(2.0 / (in * 9.0));
    for (double& v : w.values()) v = rng.normal(0.0, stddev);
    const std::string name = "stage" + std::to_string(stage + 1);
    Layer layer;
    layer.weight = fx.store_.add(name + ".weight", std::move(w), ParamKind::kBuffer);
    layer.bias = fx.store_.add(name + ".bias", Tensor(Shape{1, widths[stage], 1, 1}, 0.0), ParamKind::kBuffer);
    layer.tap = true;
    fx.layers_.push_back(layer);
    in = widths[stage];
  }
  fx.tap_count_ = 5;
  return fx;
}

FeatureExtractor FeatureExtractor::identity() {
  FeatureExtractor fx;
  fx.tap_count_ = 1;
  return fx;
}

FeatureExtractor FeatureExtractor::from_vgg16(const TensorContainer& weights) {
  // relu1_1, relu2_1, relu3_1, relu4_1, relu5_1 of the VGG16 trunk.
  const std::vector<std::vector<std::string>> blocks = {
      {"conv1_1", "conv1_2"},
      {"conv2_1", "conv2_2"},
      {"conv3_1", "conv3_2", "conv3_3"},
      {"conv4_1", "conv4_2", "conv4_3"},
      {"conv5_1"}};
  FeatureExtractor fx;
  fx.imagenet_input_ = true;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b > 0) fx.layers_.push_back(Layer{Layer::Kind::kPool, {}, {}, false});
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      const std::string& name = blocks[b][i];
      const Tensor& w = weights.get(name + ".weight");
      const Tensor& bias = weights.get(name + ".bias");
      if (w.shape().h != 3 || w.shape().w != 3 || bias.size() != static_cast<std::size_t>(w.shape().n)) {
        throw IoError("VGG16 weights: unexpected shape for " + name);
      }
      Layer layer;
      layer.weight = fx.store_.add(name + ".weight", w, ParamKind::kBuffer);
      layer.bias = fx.store_.add(name + ".bias", bias.reshaped(Shape{1, w.shape().n, 1, 1}), ParamKind::kBuffer);
      layer.tap = i == 0;
      fx.layers_.push_back(layer);
    }
  }
  fx.tap_count_ = 5;
  return fx;
}

std::vector<Var> FeatureExtractor::operator()(const Var& image) const {
  if (layers_.empty()) return {image};
  Var h = image;
  if (imagenet_input_) {
    // [-1, 1] -> [0, 1] -> ImageNet mean/std, as a fixed per-channel affine map.
    static const double kMean[3] = {0.485, 0.456, 0.406};
    static const double kStd[3] = {0.229, 0.224, 0.225};
    Tensor w(Shape{3, 3, 1, 1}, 0.0);
    Tensor b(Shape{1, 3, 1, 1});
    for (int c = 0; c < 3; ++c) {
      w.at(c, c, 0, 0) = 0.5 / kStd[c];
      b.at(0, c, 0, 0) = (0.5 - kMean[c]) / kStd[c];
    }
    h = conv2d(h, Var::constant(std::move(w)), Var::constant(std::move(b)), {});
  }
  std::vector<Var> taps;
  for (const Layer& layer : layers_) {
    if (layer.kind == Layer::Kind::kPool) {
      const Shape s = h.shape();
      if (s.h >= 2 && s.w >= 2 && s.h % 2 == 0 && s.w % 2 == 0) h = avg_pool2x2(h);
      continue;
    }
    h = relu(conv2d(h, layer.weight, layer.bias, {1, 1, 1}));
    if (layer.tap) taps.push_back(h);
  }
  return taps;
}

Var pyramid_loss(const std::vector<Var>& detailed, const std::vector<Var>& structure,
                 const std::vector<Tensor>& detailed_gt, const std::vector<Tensor>& structure_gt) {
  if (detailed.empty()) throw InputError("pyramid loss: empty prediction pyramid");
  auto stream_terms = [](const std::vector<Var>& pred, const std::vector<Tensor>& gt, const char* which,
                         std::vector<Var>& terms) {
    if (pred.size() > gt.size()) {
      throw InputError(std::string("pyramid loss: ") + which + " ground truth has " + std::to_string(gt.size()) +
                       " levels, prediction has " + std::to_string(pred.size()));
    }
    for (std::size_t l = 0; l < pred.size(); ++l) {
      if (!(pred[l].shape() == gt[l].shape())) {
        throw InputError(std::string("pyramid loss: ") + which + " level " + std::to_string(l + 1) +
                         " scale mismatch " + pred[l].shape().str() + " vs " + gt[l].shape().str());
      }
      terms.push_back(mean_abs_diff(clamp(pred[l], -1.0, 1.0), Var::constant(gt[l])));
    }
  };
  std::vector<Var> terms;
  stream_terms(detailed, detailed_gt, "detailed", terms);
  if (!structure.empty()) stream_terms(structure, structure_gt, "structure", terms);
  return sum_all(terms);
}

namespace {

void require_pair(const Var& pred, const Tensor& gt, const char* what) {
  if (!(pred.shape() == gt.shape())) {
    throw InputError(std::string(what) + ": prediction " + pred.shape().str() + " vs ground truth " +
                     gt.shape().str());
  }
}

}  // namespace

std::vector<Tensor> frozen_features(const FeatureExtractor& extractor, const Tensor& image) {
  NoGradGuard guard;
  std::vector<Tensor> out;
  for (const Var& f : extractor(Var::constant(image))) out.push_back(f.value());
  return out;
}

Var perceptual_loss(const std::vector<Var>& pred_features, const std::vector<Tensor>& gt_features) {
  if (pred_features.size() != gt_features.size()) throw InputError("perceptual loss: tap count mismatch");
  std::vector<Var> terms;
  for (std::size_t i = 0; i < pred_features.size(); ++i) {
    terms.push_back(mean_abs_diff(pred_features[i], Var::constant(gt_features[i])));
  }
  return sum_all(terms);
}

Var style_loss(const std::vector<Var>& pred_features, const std::vector<Tensor>& gt_features) {
  if (pred_features.size() != gt_features.size()) throw InputError("style loss: tap count mismatch");
  std::vector<Var> terms;
  for (std::size_t i = 0; i < pred_features.size(); ++i) {
    Tensor target;
    {
      NoGradGuard guard;
      target = gram_matrix(Var::constant(gt_features[i])).value();
    }
    terms.push_back(mean_abs_diff(gram_matrix(pred_features[i]), Var::constant(std::move(target))));
  }
  return sum_all(terms);
}

Var perceptual_loss(const FeatureExtractor& extractor, const Var& pred, const Tensor& gt) {
  require_pair(pred, gt, "perceptual loss");
  return perceptual_loss(extractor(pred), frozen_features(extractor, gt));
}

Var style_loss(const FeatureExtractor& extractor, const Var& pred, const Tensor& gt) {
  require_pair(pred, gt, "style loss");
  return style_loss(extractor(pred), frozen_features(extractor, gt));
}

AdversarialLosses adversarial_losses(const Var& d_real, const Var& d_fake) {
  if (!(d_real.shape() == d_fake.shape())) {
    throw InputError("adversarial loss: score maps differ " + d_real.shape().str() + " vs " + d_fake.shape().str());
  }
  const Var real_mean = mean(d_real);
  const Var fake_mean = mean(d_fake);
  const Var real_rel = sub_broadcast_scalar(d_real, fake_mean);  // D(real) - mean D(fake)
  const Var fake_rel = sub_broadcast_scalar(d_fake, real_mean);  // D(fake) - mean D(real)
  AdversarialLosses out;
  out.discriminator = add(mean(square(add_scalar(real_rel, -1.0))), mean(square(add_scalar(fake_rel, 1.0))));
  out.generator = add(mean(square(add_scalar(fake_rel, -1.0))), mean(square(add_scalar(real_rel, 1.0))));
  return out;
}

Objective total_losses(const LossWeights& weights, const LossComponents& c) {
  auto value_of = [](const Var& v, const char* name) {
    if (!v.defined()) return 0.0;
    const double x = v.value().item();
    if (!std::isfinite(x)) throw TrainingError(std::string("non-finite loss term ") + name);
    return x;
  };
  Objective out;
  LossReport& r = out.report;
  r.l_py = value_of(c.pyramid, "l_py");
  r.l_per_ms = value_of(c.perceptual_ms, "l_per_ms");
  r.l_per_ss = value_of(c.perceptual_ss, "l_per_ss");
  r.l_sty = value_of(c.style, "l_sty");
  r.l_adv_g = value_of(c.adversarial_g, "l_adv_g");
  r.total_g = weights.pyramid * r.l_py + weights.perceptual * (r.l_per_ms + r.l_per_ss) + weights.style * r.l_sty +
              weights.adversarial * r.l_adv_g;

  std::vector<Var> terms;
  auto push = [&](const Var& v, double w) {
    if (v.defined()) terms.push_back(scale(v, w));
  };
  push(c.pyramid, weights.pyramid);
  push(c.perceptual_ms, weights.perceptual);
  push(c.perceptual_ss, weights.perceptual);
  push(c.style, weights.style);
  push(c.adversarial_g, weights.adversarial);
  out.generator_total = terms.empty() ? Var::constant(Tensor::scalar(0.0)) : sum_all(terms);
  return out;
}

}  // namespace tsi
