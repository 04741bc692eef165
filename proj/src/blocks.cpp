// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsinpaint/blocks.hpp"

#include <cmath>

#include "tsinpaint/error.hpp"

namespace tsi {

ConvParams ConvParams::create(ParamStore& store, const std::string& name, int in_channels, int out_channels,
                              int kernel, ConvGeometry geometry, bool with_bias, Rng& rng) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1) {
    throw ConfigError("invalid convolution " + name + ": " + std::to_string(in_channels) + " -> " +
                      std::to_string(out_channels) + ", kernel " + std::to_string(kernel));
  }
  Tensor w(Shape{out_channels, in_channels, kernel, kernel});
  const double stddev = std::sqrt(2.0 / static_cast<double>(in_channels * kernel * kernel));
  for (double& v : w.values()) v = rng.normal(0.0, stddev);
  ConvParams conv;
  conv.weight = store.add(name + ".weight", std::move(w));
  if (with_bias) conv.bias = store.add(name + ".bias", Tensor(Shape{1, out_channels, 1, 1}, 0.0));
  conv.geometry = geometry;
  return conv;
}

Var apply_conv(const ConvParams& conv, const Var& x) {
  return conv2d(x, conv.weight, conv.bias, conv.geometry);
}

GatedUnitParams GatedUnitParams::create(ParamStore& store, const std::string& prefix, int channels, Rng& rng) {
  return {ConvParams::create(store, prefix + ".conv", channels, channels, 3, {1, 1, 1}, true, rng)};
}

GateOutput gated_unit(const GatedUnitParams& params, const Var& x) {
  if (x.shape().c != params.conv.in_channels() || params.conv.out_channels() != params.conv.in_channels()) {
    throw ConfigError("gated unit expects " + std::to_string(params.conv.in_channels()) +
                      " channels, input is " + x.shape().str());
  }
  if (!x.value().all_finite()) throw InputError("gated unit input contains non-finite values");
  const Var logit = clamp(leaky_relu(apply_conv(params.conv, x), kLeakySlope), -kGateLogitLimit, kGateLogitLimit);
  Var gate = sigmoid(logit);
  return {mul(gate, x), gate};
}

ChannelAttentionParams ChannelAttentionParams::create(ParamStore& store, const std::string& prefix, int channels,
                                                      Rng& rng, int reduction) {
  if (reduction < 1 || channels < reduction || channels % reduction != 0) {
    throw ConfigError("channel attention: " + std::to_string(channels) +
                      " channels not divisible by reduction ratio " + std::to_string(reduction));
  }
  const int hidden = channels / reduction;
  ChannelAttentionParams p;
  p.reduce = ConvParams::create(store, prefix + ".reduce", channels, hidden, 1, {}, true, rng);
  p.expand = ConvParams::create(store, prefix + ".expand", hidden, channels, 1, {}, true, rng);
  return p;
}

Var channel_attention(const ChannelAttentionParams& params, const Var& f) {
  Var pooled = global_avg_pool(f);
  return sigmoid(apply_conv(params.expand, relu(apply_conv(params.reduce, pooled))));
}

SpatialAttentionParams SpatialAttentionParams::create(ParamStore& store, const std::string& prefix, Rng& rng) {
  return {ConvParams::create(store, prefix + ".conv", 2, 1, 5, {1, 2, 1}, true, rng)};
}

Var spatial_attention(const SpatialAttentionParams& params, const Var& f) {
  Var pooled = concat_channels({channel_mean(f), channel_max(f)});
  return sigmoid(apply_conv(params.conv, pooled));
}

AdaptiveFusionParams AdaptiveFusionParams::create(ParamStore& store, const std::string& prefix, int x_channels,
                                                  int s_channels, int out_channels, Rng& rng, int reduction) {
  AdaptiveFusionParams p;
  p.entry = ConvParams::create(store, prefix + ".entry", x_channels + s_channels, out_channels, 1, {}, true, rng);
  p.channel = ChannelAttentionParams::create(store, prefix + ".channel", out_channels, rng, reduction);
  p.spatial = SpatialAttentionParams::create(store, prefix + ".spatial", rng);
  p.mix_logit = store.add(prefix + ".mix_logit", Tensor::scalar(0.0));
  return p;
}

namespace {

Var fuse_entry(const ConvParams& entry, const Var& x_dec, const Var& s_dec) {
  const Shape xs = x_dec.shape();
  const Shape ss = s_dec.shape();
  if (xs.n != ss.n || xs.h != ss.h || xs.w != ss.w) {
    throw InputError("adaptive fusion: stream shapes " + xs.str() + " and " + ss.str() + " differ spatially");
  }
  return leaky_relu(apply_conv(entry, concat_channels({x_dec, s_dec})), kLeakySlope);
}

}  // namespace

FusionOutput adaptive_fusion(const AdaptiveFusionParams& params, const Var& x_dec, const Var& s_dec) {
  FusionOutput out;
  out.fused = fuse_entry(params.entry, x_dec, s_dec);
  out.channel_branch = mul_channelwise(out.fused, channel_attention(params.channel, out.fused));
  out.spatial_branch = mul_spatialwise(out.fused, spatial_attention(params.spatial, out.fused));
  out.alpha = sigmoid(params.mix_logit);
  out.output = lerp(out.alpha, out.channel_branch, out.spatial_branch);
  return out;
}

Var concat_fusion(const ConvParams& projection, const Var& x_dec, const Var& s_dec) {
  return fuse_entry(projection, x_dec, s_dec);
}

ResidualBlockParams ResidualBlockParams::create(ParamStore& store, const std::string& prefix, int channels,
                                                Rng& rng, bool normalize) {
  ResidualBlockParams p;
  const ConvGeometry dilated{1, 2, 2};
  p.first = ConvParams::create(store, prefix + ".first", channels, channels, 3, dilated, !normalize, rng);
  p.second = ConvParams::create(store, prefix + ".second", channels, channels, 3, dilated, true, rng);
  p.normalize = normalize;
  return p;
}

Var residual_dilated_block(const ResidualBlockParams& params, const Var& x) {
  if (x.shape().c != params.first.in_channels() || params.second.out_channels() != x.shape().c) {
    throw ConfigError("residual block expects " + std::to_string(params.first.in_channels()) +
                      " channels, input is " + x.shape().str());
  }
  Var h = apply_conv(params.first, x);
  if (params.normalize) h = instance_norm(h, kNormEpsilon);
  h = leaky_relu(h, kLeakySlope);
  return add(x, apply_conv(params.second, h));
}

}  // namespace tsi
