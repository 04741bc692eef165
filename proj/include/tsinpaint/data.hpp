// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

// Data conventions (bit-exact):
//   * Images are (1, 3, H, W) RGB, channel order R, G, B, with 8-bit value v
//     mapped to v / 127.5 - 1, so 0 -> -1.0, 255 -> 1.0 and 128 -> 1/255.
//     Saving inverts with round((x + 1) * 127.5), clamped to [0, 255].
//   * Masks are (1, 1, H, W) with 1 = hole (missing) and 0 = known. Mask PNGs
//     are read as 8-bit grayscale; any nonzero pixel is a hole. Written masks
//     use 255 for holes.
//   * Loading center-crops to the target aspect ratio, then resizes with
//     area interpolation (nearest for masks).
//   * Dataset directories hold .png/.jpg/.jpeg files taken in lexicographic
//     filename order. An optional `structures/` subdirectory supplies
//     precomputed structure images under the same filenames.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tsinpaint/rng.hpp"
#include "tsinpaint/tensor.hpp"

namespace tsi {

// --- image files ----------------------------------------------------------------

struct ImageSize {
  int height = 0;
  int width = 0;
};

/// Stored size of an image file, before any crop or resize.
ImageSize image_size(const std::filesystem::path& path);

Tensor load_image(const std::filesystem::path& path, int height, int width);
void save_image(const Tensor& image, const std::filesystem::path& path);
Tensor load_mask(const std::filesystem::path& path, int height, int width);
void save_mask(const Tensor& mask, const std::filesystem::path& path);
/// Writes a (1, 1, H, W) map with values already in [0, 255] as 8-bit grayscale.
void save_gray(const Tensor& values, const std::filesystem::path& path);

/// Sorted image files of a directory (non-recursive).
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

// --- masks ----------------------------------------------------------------------

/// Hole-to-image area ratio interval.
struct MaskBin {
  double lower = 0.0;
  double upper = 1.0;

  /// InputError unless 0 <= lower < upper <= 1.
  void validate() const;
  [[nodiscard]] bool contains(double ratio) const { return ratio >= lower && ratio <= upper; }
  [[nodiscard]] std::string label() const;
};

/// The evaluation bins 10-20%, 20-30%, 30-40% and 40-50%.
std::vector<MaskBin> default_mask_bins();

double hole_ratio(const Tensor& mask);

/// Free-form brush-stroke mask with a hole ratio inside `bin` and strictly in
/// (0, 1). Draws a target ratio uniformly from the bin, paints random-walk
/// strokes until the target is reached and rejects overshoots; GenerationError
/// after 100 rejected attempts.
Tensor generate_irregular_mask(Rng& rng, int height, int width, const MaskBin& bin);

// --- structure labels -------------------------------------------------------------

struct StructureFilter {
  int iterations = 3;
  double sigma_spatial = 3.0;
  double sigma_range = 0.1;
};

/// Edge-preserving smoothing by rolling joint bilateral filtering: each pass
/// filters the input image with range weights taken from the previous pass.
/// Range distance is Euclidean over RGB; the window radius is ceil(3 sigma_spatial).
Tensor structure_label(const Tensor& image, const StructureFilter& filter = {});

// --- pyramids and samples ---------------------------------------------------------

/// [image, avg_pool(image), ...] with `levels` entries, level 1 first.
std::vector<Tensor> build_pyramid(const Tensor& image, int levels);

struct ImageSample {
  Tensor image;      // ground truth, (1, 3, H, W) in [-1, 1]
  Tensor mask;       // (1, 1, H, W), 1 = hole
  Tensor structure;  // (1, 3, H, W) in [-1, 1]
  std::vector<Tensor> image_pyramid;
  std::vector<Tensor> structure_pyramid;
};

ImageSample make_sample(const Tensor& image, const Tensor& structure, const Tensor& mask, int levels);

/// Mirrors image, mask, structure and both pyramids left-right.
ImageSample flip_sample(const ImageSample& sample);
/// Applies flip_sample with probability 0.5.
ImageSample augment(Rng& rng, const ImageSample& sample);

/// Concatenates samples along the batch axis.
ImageSample collate(const std::vector<ImageSample>& samples);

// --- datasets -----------------------------------------------------------------------

/// In-memory image set with cached structure labels.
class ImageDataset {
 public:
  struct Entry {
    std::string name;
    Tensor image;
    Tensor structure;
  };

  /// Loads every image of `dir`. Structure images come from `structure_dir`
  /// when given, else from `dir/structures` when present, else structure_label().
  static ImageDataset from_directory(const std::filesystem::path& dir, int height, int width,
                                     const std::optional<std::filesystem::path>& structure_dir = std::nullopt);
  static ImageDataset from_images(std::vector<Tensor> images);

  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] bool empty() const { return entries_.empty(); }
  [[nodiscard]] const Entry& operator[](std::size_t i) const { return entries_.at(i); }

 private:
  std::vector<Entry> entries_;
};

/// Loads every mask of a directory.
std::vector<Tensor> load_mask_directory(const std::filesystem::path& dir, int height, int width);

}  // namespace tsi
