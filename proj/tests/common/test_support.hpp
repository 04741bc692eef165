// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

// Helpers shared by the unit and acceptance suites.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tsinpaint/autograd.hpp"
#include "tsinpaint/rng.hpp"
#include "tsinpaint/tensor.hpp"

namespace tsi::testing {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0);

/// Deterministic 3-channel test scene in [-1, 1]: a tilted color gradient,
/// a few flat rectangles and discs, and a faint stripe texture.
Tensor synthetic_image(std::uint64_t seed, int height, int width);

/// Same shape and the same bit pattern in every element.
bool bit_identical(const Tensor& a, const Tensor& b);

/// mean(y * R) for a fixed random R, so every element of y reaches the scalar.
Var probe(const Var& y, std::uint64_t seed = 99);

struct GradCheck {
  double max_rel_error = 0.0;  // over all checked inputs
  std::string worst_input;
};

/// Compares the autograd gradient of the scalar `f(inputs)` against central
/// differences with step `h`. The error of one input is the norm-wise
/// relative error ||g_auto - g_fd|| / max(||g_auto||, ||g_fd||, 1e-12).
GradCheck check_gradients(const std::function<Var(const std::vector<Var>&)>& f, const std::vector<Tensor>& inputs,
                          const std::vector<std::string>& names = {}, double h = 1e-6);

/// Gradient check of every trainable entry of `params` plus the given inputs.
/// `f` reads the parameters through the block's own handles.
GradCheck check_param_gradients(const std::function<Var(const std::vector<Var>&)>& f,
                                const std::vector<Tensor>& inputs, std::vector<Var> params,
                                const std::vector<std::string>& param_names, double h = 1e-6);

}  // namespace tsi::testing
