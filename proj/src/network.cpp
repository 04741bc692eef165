// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsinpaint/network.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "tsinpaint/error.hpp"

namespace tsi {
namespace {

constexpr int kInputChannels = 4;  // RGB + mask
constexpr ConvGeometry kDown{2, 1, 1};
constexpr ConvGeometry kSame3{1, 1, 1};

std::string level_name(const char* prefix, int level) { return prefix + std::to_string(level); }

Var conv_norm_act(const ConvParams& conv, const Var& x) {
  return leaky_relu(instance_norm(apply_conv(conv, x), kNormEpsilon), kLeakySlope);
}

}  // namespace

void NetworkConfig::validate() const {
  if (levels < 2) throw ConfigError("levels must be >= 2, got " + std::to_string(levels));
  if (base_channels < kAttentionReduction || base_channels % kAttentionReduction != 0) {
    throw ConfigError("base_channels must be a positive multiple of " + std::to_string(kAttentionReduction));
  }
  if (max_channels < base_channels) throw ConfigError("max_channels must be >= base_channels");
  if (bottleneck_blocks < 0) throw ConfigError("bottleneck_blocks must be >= 0");
  if (disc_base_channels < 1) throw ConfigError("disc_base_channels must be >= 1");
  const int unit = 1 << levels;
  if (height < unit || width < unit || height % unit != 0 || width % unit != 0) {
    throw ConfigError("input size " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by 2^levels = " + std::to_string(unit));
  }
}

int NetworkConfig::encoder_channels(int level) const {
  long long c = base_channels;
  for (int i = 1; i < level; ++i) c = std::min<long long>(c * 2, max_channels);
  return static_cast<int>(std::min<long long>(c, max_channels));
}

int NetworkConfig::decoder_channels(int level) const { return encoder_channels(std::max(level - 1, 1)); }

InpaintingNetwork::InpaintingNetwork(const NetworkConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int depth = config_.levels;
  const bool two_streams = !config_.variant.ms_only;
  auto enc = [&](int l) { return config_.encoder_channels(l); };
  auto dec = [&](int l) { return config_.decoder_channels(l); };
  auto skip = [&](int l) { return l == 1 ? kInputChannels : enc(l - 1); };

  for (int l = 1; l <= depth; ++l) {
    ms_enc_.push_back(ConvParams::create(store_, level_name("ms.enc", l), l == 1 ? kInputChannels : enc(l - 1),
                                         enc(l), 4, kDown, false, rng));
  }
  for (int b = 1; b <= config_.bottleneck_blocks; ++b) {
    bottleneck_.push_back(ResidualBlockParams::create(store_, level_name("ms.bottleneck", b), enc(depth), rng));
  }
  for (int l = 1; l <= depth; ++l) {
    const int prev = l == depth ? enc(depth) : dec(l + 1);
    ms_dec_.push_back(
        ConvParams::create(store_, level_name("ms.dec", l), prev + skip(l), dec(l), 3, kSame3, false, rng));
    ms_head_.push_back(ConvParams::create(store_, level_name("ms.head", l), dec(l), 3, 1, {}, true, rng));
  }
  if (!two_streams) return;

  for (int l = 1; l <= depth; ++l) {
    if (!config_.variant.no_gu) gu_.push_back(GatedUnitParams::create(store_, level_name("gu", l), enc(l), rng));
  }
  for (int l = 1; l <= depth; ++l) {
    ss_enc_.push_back(ConvParams::create(store_, level_name("ss.enc", l),
                                         l == 1 ? kInputChannels : 2 * enc(l - 1), enc(l), 4, kDown, false, rng));
  }
  for (int l = 1; l <= depth; ++l) {
    const int prev = l == depth ? 2 * enc(depth) : dec(l + 1);
    ss_dec_.push_back(
        ConvParams::create(store_, level_name("ss.dec", l), prev + skip(l), dec(l), 3, kSame3, false, rng));
    ss_head_.push_back(ConvParams::create(store_, level_name("ss.head", l), dec(l), 3, 1, {}, true, rng));
  }
  for (int l = 1; l <= depth; ++l) {
    if (config_.variant.no_afblk) {
      fuse_.push_back(ConvParams::create(store_, level_name("fuse", l), 2 * dec(l), dec(l), 1, {}, true, rng));
    } else {
      af_.push_back(AdaptiveFusionParams::create(store_, level_name("af", l), dec(l), dec(l), dec(l), rng));
    }
  }
}

Var InpaintingNetwork::network_input(const Var& image, const Var& mask) {
  const Shape ms = mask.shape();
  Tensor known(Shape{ms.n, 3, ms.h, ms.w});
  for (int n = 0; n < ms.n; ++n) {
    const double* m = mask.value().plane(n, 0);
    for (int c = 0; c < 3; ++c) {
      double* k = known.plane(n, c);
      for (std::size_t i = 0; i < ms.plane(); ++i) k[i] = 1.0 - m[i];
    }
  }
  return concat_channels({mul(image, Var::constant(std::move(known))), mask});
}

void InpaintingNetwork::check_input(const Var& image, const Var& mask) const {
  const Shape is = image.shape();
  const Shape ms = mask.shape();
  if (is.c != 3) throw InputError("image must have 3 channels, got " + is.str());
  if (!(ms == Shape{is.n, 1, is.h, is.w})) {
    throw InputError("mask shape " + ms.str() + " does not match image " + is.str());
  }
  const int unit = 1 << config_.levels;
  if (is.h % unit != 0 || is.w % unit != 0) {
    throw ConfigError("input size " + std::to_string(is.h) + "x" + std::to_string(is.w) +
                      " is not divisible by 2^levels = " + std::to_string(unit));
  }
  for (double m : mask.value().values()) {
    if (m != 0.0 && m != 1.0) throw InputError("mask must be binary (1 = hole, 0 = known)");
  }
}

std::vector<Var> InpaintingNetwork::ms_encode(const Var& image, const Var& mask) const {
  check_input(image, mask);
  std::vector<Var> features;
  Var h = network_input(image, mask);
  for (const ConvParams& conv : ms_enc_) {
    h = conv_norm_act(conv, h);
    features.push_back(h);
  }
  return features;
}

SsEncoding InpaintingNetwork::ss_encode(const Var& image, const Var& mask, const std::vector<Var>& ms_features,
                                        const ForwardOptions& options) const {
  if (config_.variant.ms_only) throw InternalError("ss_encode called on a main-stream-only model");
  if (ms_features.size() != static_cast<std::size_t>(config_.levels)) {
    throw InternalError("ss_encode expects " + std::to_string(config_.levels) + " main-stream features, got " +
                        std::to_string(ms_features.size()));
  }
  check_input(image, mask);
  SsEncoding out;
  for (int l = 1; l <= config_.levels; ++l) {
    const Var& x = ms_features[l - 1];
    const Shape expected{image.shape().n, config_.encoder_channels(l), image.shape().h >> l, image.shape().w >> l};
    if (!(x.shape() == expected)) {
      throw InternalError("main-stream feature " + std::to_string(l) + " has shape " + x.shape().str() +
                          ", expected " + expected.str());
    }
    if (options.gate_override) {
      Var gate = Var::constant(Tensor(x.shape(), *options.gate_override));
      out.gated.push_back(mul(gate, x));
      out.gates.push_back(gate);
    } else if (config_.variant.no_gu) {
      out.gated.push_back(x);
    } else {
      GateOutput g = gated_unit(gu_[l - 1], x);
      out.gated.push_back(g.gated);
      out.gates.push_back(g.gate);
    }
  }
  Var h = conv_norm_act(ss_enc_[0], network_input(image, mask));
  out.features.push_back(h);
  for (int l = 2; l <= config_.levels; ++l) {
    h = conv_norm_act(ss_enc_[l - 1], concat_channels({h, out.gated[l - 2]}));
    out.features.push_back(h);
  }
  return out;
}

Var InpaintingNetwork::ms_bottleneck(const Var& deepest) const {
  Var h = deepest;
  for (const ResidualBlockParams& block : bottleneck_) h = residual_dilated_block(block, h);
  return h;
}

DecoderOutput InpaintingNetwork::ss_decode(const SsEncoding& encoding, const Var& image, const Var& mask) const {
  if (config_.variant.ms_only) throw InternalError("ss_decode called on a main-stream-only model");
  const int depth = config_.levels;
  if (encoding.features.size() != static_cast<std::size_t>(depth) ||
      encoding.gated.size() != static_cast<std::size_t>(depth)) {
    throw InternalError("ss_decode needs " + std::to_string(depth) + " encoder features and gated maps");
  }
  const Var input = network_input(image, mask);
  DecoderOutput out;
  out.features.resize(depth);
  out.pyramid.resize(depth);
  Var prev = concat_channels({encoding.features[depth - 1], encoding.gated[depth - 1]});
  for (int l = depth; l >= 1; --l) {
    const Var& skip = l == 1 ? input : encoding.features[l - 2];
    Var h = conv_norm_act(ss_dec_[l - 1], concat_channels({upsample_nearest2x(prev), skip}));
    Var rgb = apply_conv(ss_head_[l - 1], h);
    out.features[l - 1] = h;
    out.pyramid[l - 1] = l == 1 ? tanh(rgb) : rgb;
    prev = h;
  }
  return out;
}

DecoderOutput InpaintingNetwork::ms_decode(const Var& bottleneck_out, const std::vector<Var>& ms_features,
                                           const Var& image, const Var& mask,
                                           const std::vector<Var>* ss_features) const {
  const int depth = config_.levels;
  const bool fuse = !config_.variant.ms_only;
  if (ms_features.size() != static_cast<std::size_t>(depth)) {
    throw InternalError("ms_decode needs " + std::to_string(depth) + " encoder features");
  }
  if (fuse && (ss_features == nullptr || ss_features->size() != static_cast<std::size_t>(depth))) {
    throw InternalError("ms_decode is missing structure-stream decoder features");
  }
  const Var input = network_input(image, mask);
  DecoderOutput out;
  out.features.resize(depth);
  out.pyramid.resize(depth);
  Var prev = bottleneck_out;
  for (int l = depth; l >= 1; --l) {
    const Var& skip = l == 1 ? input : ms_features[l - 2];
    Var h = conv_norm_act(ms_dec_[l - 1], concat_channels({upsample_nearest2x(prev), skip}));
    if (fuse) {
      const Var& s = (*ss_features)[l - 1];
      h = config_.variant.no_afblk ? concat_fusion(fuse_[l - 1], h, s) : adaptive_fusion(af_[l - 1], h, s).output;
    }
    Var rgb = apply_conv(ms_head_[l - 1], h);
    out.features[l - 1] = h;
    out.pyramid[l - 1] = l == 1 ? tanh(rgb) : rgb;
    prev = h;
  }
  return out;
}

ForwardResult InpaintingNetwork::forward(const Var& image, const Var& mask, const ForwardOptions& options) const {
  ForwardResult r;
  r.ms_encoder_features = ms_encode(image, mask);
  DecoderOutput ss;
  if (!config_.variant.ms_only) {
    SsEncoding enc = ss_encode(image, mask, r.ms_encoder_features, options);
    r.ss_encoder_features = enc.features;
    r.gate_maps = enc.gates;
    ss = ss_decode(enc, image, mask);
    r.ss_decoder_features = ss.features;
    r.structure_pyramid = ss.pyramid;
  }
  Var bottleneck_out = ms_bottleneck(r.ms_encoder_features.back());
  DecoderOutput ms = ms_decode(bottleneck_out, r.ms_encoder_features, image, mask,
                               config_.variant.ms_only ? nullptr : &ss.features);
  r.ms_decoder_features = ms.features;
  r.detailed_pyramid = ms.pyramid;
  r.final_image = r.detailed_pyramid.front();

  const Shape is = image.shape();
  Tensor hole(is);
  Tensor known(is);
  for (int n = 0; n < is.n; ++n) {
    const double* m = mask.value().plane(n, 0);
    for (int c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < is.plane(); ++i) {
        hole.plane(n, c)[i] = m[i];
        known.plane(n, c)[i] = 1.0 - m[i];
      }
    }
  }
  r.composited = add(mul(Var::constant(std::move(known)), image), mul(Var::constant(std::move(hole)), r.final_image));
  return r;
}

ForwardResult InpaintingNetwork::forward(const Tensor& image, const Tensor& mask,
                                         const ForwardOptions& options) const {
  return forward(Var::constant(image), Var::constant(mask), options);
}

Tensor InpaintingNetwork::inpaint(const Tensor& image, const Tensor& mask) const {
  NoGradGuard no_grad;
  return forward(image, mask).composited.value();
}

// --- discriminator ---------------------------------------------------------------

namespace {

void normalize(Eigen::Ref<Eigen::VectorXd> v) {
  const double norm = v.norm();
  v /= std::max(norm, 1e-12);
}

}  // namespace

Discriminator::Discriminator(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const int b = config.disc_base_channels;
  const int widths[kLayers] = {b, 2 * b, 4 * b, 4 * b, 4 * b, 1};
  int in = kInputChannels;
  for (int i = 0; i < kLayers; ++i) {
    Layer layer;
    const std::string name = level_name("disc.conv", i + 1);
    layer.conv = ConvParams::create(store_, name, in, widths[i], 5, {2, 2, 1}, true, rng);
    const int k = in * 25;
    Tensor u(Shape{1, 1, 1, widths[i]});
    for (double& x : u.values()) x = rng.normal();
    Eigen::Map<Eigen::VectorXd> um(u.data(), widths[i]);
    normalize(um);
    Tensor v(Shape{1, 1, 1, k});
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
        layer.conv.weight.value().data(), widths[i], k);
    Eigen::Map<Eigen::VectorXd> vm(v.data(), k);
    vm = w.transpose() * um;
    normalize(vm);
    layer.u = store_.add(name + ".sn_u", std::move(u), ParamKind::kBuffer);
    layer.v = store_.add(name + ".sn_v", std::move(v), ParamKind::kBuffer);
    layers_.push_back(std::move(layer));
    in = widths[i];
  }
}

void Discriminator::power_iterate(int iterations) {
  for (Layer& layer : layers_) {
    const Shape ws = layer.conv.weight.shape();
    const int k = ws.c * ws.h * ws.w;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
        layer.conv.weight.value().data(), ws.n, k);
    Eigen::Map<Eigen::VectorXd> u(layer.u.mutable_value().data(), ws.n);
    Eigen::Map<Eigen::VectorXd> v(layer.v.mutable_value().data(), k);
    for (int i = 0; i < iterations; ++i) {
      v = w.transpose() * u;
      normalize(v);
      u = w * v;
      normalize(u);
    }
  }
}

double Discriminator::sigma_estimate(int index) const {
  const Layer& layer = layers_.at(static_cast<std::size_t>(index));
  const Shape ws = layer.conv.weight.shape();
  const int k = ws.c * ws.h * ws.w;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
      layer.conv.weight.value().data(), ws.n, k);
  Eigen::Map<const Eigen::VectorXd> u(layer.u.value().data(), ws.n);
  Eigen::Map<const Eigen::VectorXd> v(layer.v.value().data(), k);
  return u.dot(w * v);
}

Tensor Discriminator::normalized_kernel(int index) const {
  const Layer& layer = layers_.at(static_cast<std::size_t>(index));
  NoGradGuard guard;
  return spectral_normalize(layer.conv.weight, layer.u.value(), layer.v.value()).value();
}

Var Discriminator::forward(const Var& image, const Var& mask) const {
  Var h = concat_channels({image, mask});
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    Var w = spectral_normalize(layer.conv.weight, layer.u.value(), layer.v.value());
    h = conv2d(h, w, layer.conv.bias, layer.conv.geometry);
    if (i + 1 < layers_.size()) h = leaky_relu(h, kLeakySlope);
  }
  return h;
}

Var Discriminator::forward_training(const Var& image, const Var& mask, int iterations) {
  power_iterate(iterations);
  return forward(image, mask);
}

}  // namespace tsi
