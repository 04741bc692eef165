// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsinpaint/diagnostics.hpp"

#include <algorithm>

#include "tsinpaint/error.hpp"

namespace tsi {
namespace {

constexpr double kFlatRange = 1e-12;

}  // namespace

std::vector<Tensor> gate_images(const ForwardResult& result) {
  std::vector<Tensor> out;
  for (const Var& gate : result.gate_maps) {
    const Tensor& g = gate.value();
    const Shape s = g.shape();
    Tensor mean(Shape{1, 1, s.h, s.w});
    for (int c = 0; c < s.c; ++c) {
      const double* src = g.plane(0, c);
      for (std::size_t i = 0; i < s.plane(); ++i) mean[i] += src[i];
    }
    for (double& v : mean.values()) v /= s.c;
    const auto [lo, hi] = std::minmax_element(mean.values().begin(), mean.values().end());
    const double low = *lo;
    const double range = *hi - low;
    for (double& v : mean.values()) v = range <= kFlatRange ? 128.0 : 255.0 * (v - low) / range;
    out.push_back(std::move(mean));
  }
  return out;
}

std::vector<Tensor> pyramid_images(const std::vector<Var>& heads) {
  std::vector<Tensor> out;
  for (const Var& head : heads) {
    Tensor img = head.value().batch_slice(0, 1);
    for (double& v : img.values()) v = std::clamp(v, -1.0, 1.0);
    out.push_back(std::move(img));
  }
  return out;
}

double laplacian_energy(const Tensor& image) {
  const Shape s = image.shape();
  if (s.h < 3 || s.w < 3) throw InputError("laplacian_energy needs at least 3x3, got " + s.str());
  double total = 0.0;
  std::size_t count = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 1; y + 1 < s.h; ++y) {
        for (int x = 1; x + 1 < s.w; ++x) {
          const double lap = image.at(n, c, y - 1, x) + image.at(n, c, y + 1, x) + image.at(n, c, y, x - 1) +
                             image.at(n, c, y, x + 1) - 4.0 * image.at(n, c, y, x);
          total += lap * lap;
          ++count;
        }
      }
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace tsi
