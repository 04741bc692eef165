// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable tensor operations. All inputs and outputs are NCHW.

#pragma once

#include <vector>

#include "tsinpaint/autograd.hpp"

namespace tsi {

struct ConvGeometry {
  int stride = 1;
  int padding = 0;
  int dilation = 1;

  /// Output extent along one axis for an input extent and kernel size.
  [[nodiscard]] int output_size(int input, int kernel) const {
    return (input + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
  }
};

/// Cross-correlation. `weight` is (C_out, C_in, kH, kW); `bias`, when defined,
/// is (1, C_out, 1, 1).
Var conv2d(const Var& x, const Var& weight, const Var& bias, ConvGeometry geometry);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double k);
Var add_scalar(const Var& x, double k);
/// x - s for a one-element `s`, broadcast over x.
Var sub_broadcast_scalar(const Var& x, const Var& s);
Var square(const Var& x);

/// x * a with `a` broadcast from (N, C, 1, 1).
Var mul_channelwise(const Var& x, const Var& a);
/// x * a with `a` broadcast from (N, 1, H, W).
Var mul_spatialwise(const Var& x, const Var& a);
/// alpha * a + (1 - alpha) * b for a one-element `alpha`.
Var lerp(const Var& alpha, const Var& a, const Var& b);

Var leaky_relu(const Var& x, double negative_slope);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var tanh(const Var& x);
/// Gradient passes only where lo < x < hi.
Var clamp(const Var& x, double lo, double hi);

/// Per (n, c) plane normalization to zero mean and unit variance, no affine.
Var instance_norm(const Var& x, double eps);

Var concat_channels(const std::vector<Var>& parts);
Var upsample_nearest2x(const Var& x);
Var avg_pool2x2(const Var& x);

/// Mean over H and W, giving (N, C, 1, 1).
Var global_avg_pool(const Var& x);
/// Mean over C, giving (N, 1, H, W).
Var channel_mean(const Var& x);
/// Max over C, giving (N, 1, H, W). Ties route the gradient to the first maximum.
Var channel_max(const Var& x);

/// Mean of all elements, giving a scalar.
Var mean(const Var& x);
/// mean(|a - b|) over all elements.
Var mean_abs_diff(const Var& a, const Var& b);
Var sum_all(const std::vector<Var>& scalars);

/// Per batch item F F^T / (C H W) with F the (C, H*W) unfolding; result (N, 1, C, C).
Var gram_matrix(const Var& x);

/// W / sigma with sigma = u^T W v, W viewed as (C_out, C_in*kH*kW). u and v are
/// treated as constants, which is the usual spectral-normalization gradient.
Var spectral_normalize(const Var& weight, const Tensor& u, const Tensor& v);

/// Plain (non-recording) helpers shared with the data pipeline.
Tensor avg_pool2x2(const Tensor& x);
Tensor flip_horizontal(const Tensor& x);

}  // namespace tsi
