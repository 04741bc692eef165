// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsinpaint/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "tsinpaint/error.hpp"
#include "tsinpaint/ops.hpp"

namespace tsi {
namespace {

void require_target(int height, int width) {
  if (height < 1 || width < 1) {
    throw InputError("target size must be positive, got " + std::to_string(height) + "x" + std::to_string(width));
  }
}

cv::Mat read_checked(const std::filesystem::path& path, int flags) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  cv::Mat m = cv::imread(path.string(), flags);
  if (m.empty()) throw IoError("cannot decode image " + path.string());
  return m;
}

// Crops the largest centered window with the target aspect ratio.
cv::Mat center_crop(const cv::Mat& m, int height, int width) {
  const double target = static_cast<double>(width) / height;
  int w = m.cols;
  int h = m.rows;
  if (static_cast<double>(w) / h > target) {
    w = std::max(1, static_cast<int>(std::lround(h * target)));
  } else {
    h = std::max(1, static_cast<int>(std::lround(w / target)));
  }
  return m(cv::Rect((m.cols - w) / 2, (m.rows - h) / 2, w, h));
}

cv::Mat fit(const cv::Mat& m, int height, int width, int interpolation) {
  cv::Mat cropped = center_crop(m, height, width);
  if (cropped.rows == height && cropped.cols == width) return cropped.clone();
  cv::Mat out;
  cv::resize(cropped, out, cv::Size(width, height), 0, 0, interpolation);
  return out;
}

void write_checked(const std::filesystem::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

ImageSize image_size(const std::filesystem::path& path) {
  const cv::Mat m = read_checked(path, cv::IMREAD_UNCHANGED);
  return {m.rows, m.cols};
}

Tensor load_image(const std::filesystem::path& path, int height, int width) {
  require_target(height, width);
  const cv::Mat bgr = fit(read_checked(path, cv::IMREAD_COLOR), height, width, cv::INTER_AREA);
  Tensor out(Shape{1, 3, height, width});
  for (int y = 0; y < height; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(0, c, y, x) = row[x][2 - c] / 127.5 - 1.0;
    }
  }
  return out;
}

void save_image(const Tensor& image, const std::filesystem::path& path) {
  const Shape s = image.shape();
  if (s.n != 1 || s.c != 3) throw InputError("save_image expects (1, 3, H, W), got " + s.str());
  cv::Mat bgr(s.h, s.w, CV_8UC3);
  for (int y = 0; y < s.h; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < s.w; ++x) {
      for (int c = 0; c < 3; ++c) row[x][2 - c] = to_byte((image.at(0, c, y, x) + 1.0) * 127.5);
    }
  }
  write_checked(path, bgr);
}

Tensor load_mask(const std::filesystem::path& path, int height, int width) {
  require_target(height, width);
  const cv::Mat gray = fit(read_checked(path, cv::IMREAD_GRAYSCALE), height, width, cv::INTER_NEAREST);
  Tensor out(Shape{1, 1, height, width});
  for (int y = 0; y < height; ++y) {
    const auto* row = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < width; ++x) out.at(0, 0, y, x) = row[x] != 0 ? 1.0 : 0.0;
  }
  return out;
}

void save_mask(const Tensor& mask, const std::filesystem::path& path) {
  Tensor scaled = mask;
  for (double& v : scaled.values()) v = v > 0.5 ? 255.0 : 0.0;
  save_gray(scaled, path);
}

void save_gray(const Tensor& values, const std::filesystem::path& path) {
  const Shape s = values.shape();
  if (s.n != 1 || s.c != 1) throw InputError("save_gray expects (1, 1, H, W), got " + s.str());
  cv::Mat gray(s.h, s.w, CV_8UC1);
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) gray.at<std::uint8_t>(y, x) = to_byte(values.at(0, 0, y, x));
  }
  write_checked(path, gray);
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// --- masks ----------------------------------------------------------------------

void MaskBin::validate() const {
  if (!(lower >= 0.0 && lower < upper && upper <= 1.0)) {
    throw InputError("invalid mask bin [" + std::to_string(lower) + ", " + std::to_string(upper) + "]");
  }
}

std::string MaskBin::label() const {
  return std::to_string(static_cast<int>(std::lround(lower * 100))) + "-" +
         std::to_string(static_cast<int>(std::lround(upper * 100))) + "%";
}

std::vector<MaskBin> default_mask_bins() { return {{0.1, 0.2}, {0.2, 0.3}, {0.3, 0.4}, {0.4, 0.5}}; }

double hole_ratio(const Tensor& mask) {
  if (mask.empty()) return 0.0;
  double holes = 0.0;
  for (double v : mask.values()) holes += v > 0.5 ? 1.0 : 0.0;
  return holes / static_cast<double>(mask.size());
}

namespace {

class StrokeCanvas {
 public:
  StrokeCanvas(int height, int width) : h_(height), w_(width), mask_(Shape{1, 1, height, width}) {}

  void stamp(double cx, double cy, int radius) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int x1 = std::min(w_ - 1, static_cast<int>(std::ceil(cx + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int y1 = std::min(h_ - 1, static_cast<int>(std::ceil(cy + radius)));
    const double r2 = (radius + 0.5) * (radius + 0.5);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx;
        const double dy = y - cy;
        double& m = mask_.at(0, 0, y, x);
        if (m == 0.0 && dx * dx + dy * dy <= r2) {
          m = 1.0;
          ++filled_;
        }
      }
    }
  }

  [[nodiscard]] double ratio() const { return static_cast<double>(filled_) / mask_.size(); }
  Tensor take() { return std::move(mask_); }

 private:
  int h_;
  int w_;
  Tensor mask_;
  std::size_t filled_ = 0;
};

}  // namespace

Tensor generate_irregular_mask(Rng& rng, int height, int width, const MaskBin& bin) {
  require_target(height, width);
  bin.validate();
  const int side = std::min(height, width);
  const int min_radius = std::max(1, side / 32);
  const int max_radius = std::max(min_radius + 1, side / 12);
  const double min_len = std::max(2.0, side / 16.0);
  const double max_len = std::max(min_len + 1.0, side / 4.0);
  constexpr int kAttempts = 100;
  constexpr int kMaxStrokes = 500;

  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    StrokeCanvas canvas(height, width);
    const double target = rng.uniform(bin.lower, bin.upper);
    bool reached = false;
    for (int stroke = 0; stroke < kMaxStrokes && !reached; ++stroke) {
      double x = rng.uniform(0.0, width - 1.0);
      double y = rng.uniform(0.0, height - 1.0);
      double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const int radius = rng.uniform_int(min_radius, max_radius);
      const int vertices = rng.uniform_int(4, 10);
      for (int v = 0; v < vertices && !reached; ++v) {
        angle += rng.normal(0.0, 0.8);
        const double len = rng.uniform(min_len, max_len);
        const double nx = std::clamp(x + len * std::cos(angle), 0.0, width - 1.0);
        const double ny = std::clamp(y + len * std::sin(angle), 0.0, height - 1.0);
        const int steps = std::max(1, static_cast<int>(std::ceil(std::hypot(nx - x, ny - y))));
        for (int s = 0; s <= steps; ++s) {
          const double t = static_cast<double>(s) / steps;
          canvas.stamp(x + t * (nx - x), y + t * (ny - y), radius);
          if (canvas.ratio() >= target && canvas.ratio() > 0.0) {
            reached = true;
            break;
          }
        }
        x = nx;
        y = ny;
      }
    }
    const double ratio = canvas.ratio();
    if (reached && bin.contains(ratio) && ratio > 0.0 && ratio < 1.0) return canvas.take();
  }
  throw GenerationError("could not generate a " + std::to_string(height) + "x" + std::to_string(width) +
                        " mask in bin " + bin.label() + " after " + std::to_string(kAttempts) + " attempts");
}

// --- structure labels -------------------------------------------------------------

Tensor structure_label(const Tensor& image, const StructureFilter& filter) {
  const Shape s = image.shape();
  if (s.c != 3) throw InputError("structure_label expects 3-channel images, got " + s.str());
  if (filter.iterations < 1 || !(filter.sigma_spatial > 0.0) || !(filter.sigma_range > 0.0)) {
    throw ConfigError("structure filter needs iterations >= 1 and positive sigmas");
  }
  const int radius = static_cast<int>(std::ceil(3.0 * filter.sigma_spatial));
  const int span = 2 * radius + 1;
  std::vector<double> spatial(static_cast<std::size_t>(span) * span);
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      spatial[(dy + radius) * span + dx + radius] =
          std::exp(-(dx * dx + dy * dy) / (2.0 * filter.sigma_spatial * filter.sigma_spatial));
    }
  }
  const double range_scale = -1.0 / (2.0 * filter.sigma_range * filter.sigma_range);

  Tensor guide = image;
  Tensor next(s);
  for (int it = 0; it < filter.iterations; ++it) {
    for (int n = 0; n < s.n; ++n) {
      const double* g[3] = {guide.plane(n, 0), guide.plane(n, 1), guide.plane(n, 2)};
      const double* src[3] = {image.plane(n, 0), image.plane(n, 1), image.plane(n, 2)};
      double* dst[3] = {next.plane(n, 0), next.plane(n, 1), next.plane(n, 2)};
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * s.w + x;
          double wsum = 0.0;
          double acc[3] = {0.0, 0.0, 0.0};
          for (int qy = std::max(0, y - radius); qy <= std::min(s.h - 1, y + radius); ++qy) {
            for (int qx = std::max(0, x - radius); qx <= std::min(s.w - 1, x + radius); ++qx) {
              const std::size_t q = static_cast<std::size_t>(qy) * s.w + qx;
              double d2 = 0.0;
              for (int c = 0; c < 3; ++c) {
                const double d = g[c][q] - g[c][p];
                d2 += d * d;
              }
              const double wq = spatial[(qy - y + radius) * span + qx - x + radius] * std::exp(d2 * range_scale);
              wsum += wq;
              // Accumulate offsets from the center so flat regions are reproduced exactly.
              for (int c = 0; c < 3; ++c) acc[c] += wq * (src[c][q] - src[c][p]);
            }
          }
          for (int c = 0; c < 3; ++c) dst[c][p] = src[c][p] + acc[c] / wsum;
        }
      }
    }
    std::swap(guide, next);
  }
  return guide;
}

// --- pyramids and samples ---------------------------------------------------------

std::vector<Tensor> build_pyramid(const Tensor& image, int levels) {
  if (levels < 1) throw ConfigError("pyramid needs at least one level");
  const Shape s = image.shape();
  const int factor = 1 << (levels - 1);
  if (s.h % factor != 0 || s.w % factor != 0) {
    throw ConfigError("image " + s.str() + " is not divisible by 2^" + std::to_string(levels - 1));
  }
  std::vector<Tensor> out{image};
  for (int l = 1; l < levels; ++l) out.push_back(avg_pool2x2(out.back()));
  return out;
}

ImageSample make_sample(const Tensor& image, const Tensor& structure, const Tensor& mask, int levels) {
  if (!(image.shape() == structure.shape())) {
    throw InputError("structure " + structure.shape().str() + " does not match image " + image.shape().str());
  }
  const Shape s = image.shape();
  if (!(mask.shape() == Shape{s.n, 1, s.h, s.w})) {
    throw InputError("mask " + mask.shape().str() + " does not match image " + s.str());
  }
  ImageSample out;
  out.image = image;
  out.mask = mask;
  out.structure = structure;
  out.image_pyramid = build_pyramid(image, levels);
  out.structure_pyramid = build_pyramid(structure, levels);
  return out;
}

ImageSample flip_sample(const ImageSample& sample) {
  ImageSample out;
  out.image = flip_horizontal(sample.image);
  out.mask = flip_horizontal(sample.mask);
  out.structure = flip_horizontal(sample.structure);
  for (const Tensor& t : sample.image_pyramid) out.image_pyramid.push_back(flip_horizontal(t));
  for (const Tensor& t : sample.structure_pyramid) out.structure_pyramid.push_back(flip_horizontal(t));
  return out;
}

ImageSample augment(Rng& rng, const ImageSample& sample) {
  return rng.bernoulli(0.5) ? flip_sample(sample) : sample;
}

ImageSample collate(const std::vector<ImageSample>& samples) {
  if (samples.empty()) throw InputError("cannot collate an empty batch");
  if (samples.size() == 1) return samples.front();
  auto stack = [&](auto member) {
    std::vector<Tensor> parts;
    for (const ImageSample& s : samples) parts.push_back(s.*member);
    return stack_batch(parts);
  };
  auto stack_levels = [&](auto member) {
    std::vector<Tensor> out;
    const std::size_t levels = (samples.front().*member).size();
    for (std::size_t l = 0; l < levels; ++l) {
      std::vector<Tensor> parts;
      for (const ImageSample& s : samples) parts.push_back((s.*member).at(l));
      out.push_back(stack_batch(parts));
    }
    return out;
  };
  ImageSample out;
  out.image = stack(&ImageSample::image);
  out.mask = stack(&ImageSample::mask);
  out.structure = stack(&ImageSample::structure);
  out.image_pyramid = stack_levels(&ImageSample::image_pyramid);
  out.structure_pyramid = stack_levels(&ImageSample::structure_pyramid);
  return out;
}

// --- datasets -----------------------------------------------------------------------

ImageDataset ImageDataset::from_directory(const std::filesystem::path& dir, int height, int width,
                                          const std::optional<std::filesystem::path>& structure_dir) {
  std::filesystem::path sdir = structure_dir.value_or(dir / "structures");
  const bool have_structures = std::filesystem::is_directory(sdir);
  if (structure_dir && !have_structures) throw IoError("not a directory: " + sdir.string());
  ImageDataset ds;
  for (const auto& path : list_images(dir)) {
    Entry e;
    e.name = path.filename().string();
    e.image = load_image(path, height, width);
    const auto spath = sdir / path.filename();
    e.structure = have_structures && std::filesystem::exists(spath) ? load_image(spath, height, width)
                                                                    : structure_label(e.image);
    ds.entries_.push_back(std::move(e));
  }
  if (ds.entries_.empty()) throw IoError("no images found in " + dir.string());
  return ds;
}

ImageDataset ImageDataset::from_images(std::vector<Tensor> images) {
  ImageDataset ds;
  for (std::size_t i = 0; i < images.size(); ++i) {
    Entry e;
    e.name = "image" + std::to_string(i);
    e.structure = structure_label(images[i]);
    e.image = std::move(images[i]);
    ds.entries_.push_back(std::move(e));
  }
  return ds;
}

std::vector<Tensor> load_mask_directory(const std::filesystem::path& dir, int height, int width) {
  std::vector<Tensor> out;
  for (const auto& path : list_images(dir)) out.push_back(load_mask(path, height, width));
  if (out.empty()) throw IoError("no masks found in " + dir.string());
  return out;
}

}  // namespace tsi
