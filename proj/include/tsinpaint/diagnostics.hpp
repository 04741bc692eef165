// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

// Renderings of a forward pass: per-level gate maps and per-scale RGB heads.

#pragma once

#include <vector>

#include "tsinpaint/network.hpp"

namespace tsi {

/// One (1, 1, h, w) map per level with values in [0, 255]: the channel mean
/// of batch item 0's gate, min-max normalized per level. A flat map renders
/// as uniform 128.
std::vector<Tensor> gate_images(const ForwardResult& result);

/// Batch item 0 of each head output clamped to [-1, 1], shallowest first.
std::vector<Tensor> pyramid_images(const std::vector<Var>& heads);

/// Mean squared response of the 4-neighbour Laplacian over every channel.
double laplacian_energy(const Tensor& image);

}  // namespace tsi
