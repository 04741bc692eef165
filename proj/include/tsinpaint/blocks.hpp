// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

// Parameterized building blocks of the two-stream generator. Each block is a
// plain parameter struct plus a pure function of (params, inputs); nothing
// here holds state between calls.

#pragma once

#include <string>

#include "tsinpaint/ops.hpp"
#include "tsinpaint/params.hpp"
#include "tsinpaint/rng.hpp"

namespace tsi {

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kNormEpsilon = 1e-5;
inline constexpr int kAttentionReduction = 4;
// Gate logits are clamped here so the gate never rounds to exactly 0 or 1.
inline constexpr double kGateLogitLimit = 30.0;

struct ConvParams {
  Var weight;  // (C_out, C_in, k, k)
  Var bias;    // (1, C_out, 1, 1) or undefined
  ConvGeometry geometry;

  [[nodiscard]] int in_channels() const { return weight.shape().c; }
  [[nodiscard]] int out_channels() const { return weight.shape().n; }
  [[nodiscard]] int kernel() const { return weight.shape().h; }

  /// Registers `<name>.weight` (He-normal, fan-in scaled) and, when requested,
  /// a zero `<name>.bias`.
  static ConvParams create(ParamStore& store, const std::string& name, int in_channels, int out_channels,
                           int kernel, ConvGeometry geometry, bool with_bias, Rng& rng);
};

Var apply_conv(const ConvParams& conv, const Var& x);

// --- gated unit -------------------------------------------------------------

struct GatedUnitParams {
  ConvParams conv;  // 3x3, C -> C, stride 1, padding 1

  static GatedUnitParams create(ParamStore& store, const std::string& prefix, int channels, Rng& rng);
};

struct GateOutput {
  Var gated;  // gate * x
  Var gate;   // sigmoid(clamp(leaky_relu(conv3x3(x)))), entries in (0, 1)
};

/// Throws ConfigError when x does not carry the unit's channel count and
/// InputError when x holds non-finite values.
GateOutput gated_unit(const GatedUnitParams& params, const Var& x);

// --- attention ----------------------------------------------------------------

/// Squeeze-excitation style MLP, C -> C/r -> C with ReLU between.
struct ChannelAttentionParams {
  ConvParams reduce;
  ConvParams expand;

  /// ConfigError unless `channels` is a positive multiple of `reduction`.
  static ChannelAttentionParams create(ParamStore& store, const std::string& prefix, int channels, Rng& rng,
                                       int reduction = kAttentionReduction);
};

/// sigmoid(MLP(spatial average)), shape (N, C, 1, 1).
Var channel_attention(const ChannelAttentionParams& params, const Var& f);

struct SpatialAttentionParams {
  ConvParams conv;  // 5x5, 2 -> 1, padding 2

  static SpatialAttentionParams create(ParamStore& store, const std::string& prefix, Rng& rng);
};

/// sigmoid(conv5([channel mean; channel max])), shape (N, 1, H, W).
Var spatial_attention(const SpatialAttentionParams& params, const Var& f);

// --- adaptive fusion ------------------------------------------------------------

struct AdaptiveFusionParams {
  ConvParams entry;  // 1x1, (C_x + C_s) -> C_out
  ChannelAttentionParams channel;
  SpatialAttentionParams spatial;
  Var mix_logit;  // alpha = sigmoid(mix_logit), initialized to 0

  static AdaptiveFusionParams create(ParamStore& store, const std::string& prefix, int x_channels,
                                     int s_channels, int out_channels, Rng& rng,
                                     int reduction = kAttentionReduction);
};

struct FusionOutput {
  Var output;          // alpha * channel_branch + (1 - alpha) * spatial_branch
  Var fused;           // leaky_relu(conv1([x; s]))
  Var channel_branch;  // CA(fused) * fused
  Var spatial_branch;  // SA(fused) * fused
  Var alpha;
};

/// InputError when x_dec and s_dec differ in N, H or W.
FusionOutput adaptive_fusion(const AdaptiveFusionParams& params, const Var& x_dec, const Var& s_dec);

/// Ablation stand-in for the fusion block: leaky_relu(conv1([x; s])) with a
/// 1x1 `projection`, no attention and no blending.
Var concat_fusion(const ConvParams& projection, const Var& x_dec, const Var& s_dec);

// --- bottleneck -----------------------------------------------------------------

struct ResidualBlockParams {
  ConvParams first;   // 3x3, dilation 2, no bias (instance norm follows)
  ConvParams second;  // 3x3, dilation 2
  bool normalize = true;

  static ResidualBlockParams create(ParamStore& store, const std::string& prefix, int channels, Rng& rng,
                                    bool normalize = true);
};

/// x + conv(leaky_relu(norm(conv(x)))).
Var residual_dilated_block(const ResidualBlockParams& params, const Var& x);

}  // namespace tsi
