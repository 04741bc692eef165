// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace tsi {

/// NCHW extent of a dense 4D array. Scalars are 1x1x1x1.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  [[nodiscard]] std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  [[nodiscard]] bool valid() const { return n >= 1 && c >= 1 && h >= 1 && w >= 1; }
  [[nodiscard]] std::string str() const;

  bool operator==(const Shape&) const = default;
};

/// Allocator with a fixed 64-byte alignment. Vectorized reductions split
/// their work by address, so a fixed alignment keeps results reproducible
/// from one allocation to the next.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

/// Dense, contiguous, row-major (N, C, H, W) array of doubles with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, v); }

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] double* data() { return data_.data(); }
  [[nodiscard]] const double* data() const { return data_.data(); }
  [[nodiscard]] std::span<double> values() { return data_; }
  [[nodiscard]] std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  [[nodiscard]] double at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

  /// Pointer to the start of plane (n, c).
  double* plane(int n, int c) { return data_.data() + offset(n, c, 0, 0); }
  [[nodiscard]] const double* plane(int n, int c) const { return data_.data() + offset(n, c, 0, 0); }

  [[nodiscard]] double item() const;
  [[nodiscard]] bool all_finite() const;

  void fill(double v);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double k);

  /// Same data, different extent. Element counts must match.
  [[nodiscard]] Tensor reshaped(Shape shape) const;

  /// Items [first, first + count) along the batch axis.
  [[nodiscard]] Tensor batch_slice(int first, int count) const;

 private:
  [[nodiscard]] std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  Shape shape_{0, 0, 0, 0};
  AlignedBuffer data_;
};

/// Stack tensors of identical (1, C, H, W) shape along the batch axis.
Tensor stack_batch(std::span<const Tensor> items);

}  // namespace tsi
