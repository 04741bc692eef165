// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

// Image-quality metrics. Every metric takes (N, C, H, W) images in the [0, 1]
// display range; use to_display() to convert network-range tensors.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tsinpaint/data.hpp"
#include "tsinpaint/tensor.hpp"

namespace tsi {

inline constexpr double kPsnrCap = 100.0;

/// Maps [-1, 1] to [0, 1], clamping outliers.
Tensor to_display(const Tensor& x);

/// 100 * mean |pred - gt| over every pixel and channel.
double l1_percent(const Tensor& pred, const Tensor& gt);
/// 100 * mean |pred - gt| over hole pixels (mask 1) and every channel; 0 for an empty mask.
double masked_l1_percent(const Tensor& pred, const Tensor& gt, const Tensor& mask);
double mean_squared_error(const Tensor& pred, const Tensor& gt);
/// 10 log10(1 / MSE), capped at kPsnrCap.
double psnr(const Tensor& pred, const Tensor& gt);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

/// Mean SSIM over all fully-contained Gaussian windows, averaged over channels
/// and batch items. InputError if the image is smaller than the window.
double ssim(const Tensor& pred, const Tensor& gt, const SsimOptions& options = {});

// --- evaluation ---------------------------------------------------------------------

struct BinMetrics {
  MaskBin bin;
  std::size_t n_images = 0;
  std::optional<double> l1_percent;
  std::optional<double> psnr_db;
  std::optional<double> ssim;
};

struct EvalReport {
  std::vector<BinMetrics> bins;
  BinMetrics overall;
  std::size_t unbinned = 0;  // masks whose ratio falls outside every bin

  /// Fixed-width text table, one row per bin plus an "all" row.
  [[nodiscard]] std::string table() const;
  /// "bin.<label>.<metric>=<value>" lines; empty bins report "null".
  [[nodiscard]] std::string key_values() const;
};

/// Maps (image with holes, mask) to an inpainted image; both in [-1, 1].
using InpaintFn = std::function<Tensor(const Tensor& image, const Tensor& mask)>;

struct EvalCase {
  Tensor image;  // ground truth, (1, 3, H, W) in [-1, 1]
  Tensor mask;   // (1, 1, H, W)
};

/// Bin of a ratio: [lower, upper) except the last bin, which includes its upper bound.
std::optional<std::size_t> bin_index(const std::vector<MaskBin>& bins, double ratio);

/// Runs the model on every case, composites its output over the known pixels
/// and averages each metric per hole-ratio bin.
EvalReport evaluate(const InpaintFn& model, const std::vector<EvalCase>& cases,
                    const std::vector<MaskBin>& bins = default_mask_bins());

// --- Frechet distance -------------------------------------------------------------------

/// ||mu1 - mu2||^2 + tr(C1 + C2 - 2 (C1 C2)^(1/2)).
double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1, const Eigen::VectorXd& mu2,
                        const Eigen::MatrixXd& cov2);
/// Frechet distance between Gaussians fitted to two feature sets (rows are samples).
double frechet_distance(const Eigen::MatrixXd& features1, const Eigen::MatrixXd& features2);

}  // namespace tsi
