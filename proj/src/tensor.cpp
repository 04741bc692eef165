// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsinpaint/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tsinpaint/error.hpp"

namespace tsi {

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ", " << c << ", " << h << ", " << w << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {
  if (!shape.valid()) throw InputError("tensor shape must have all axes >= 1, got " + shape.str());
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape), data_(values.begin(), values.end()) {
  if (!shape.valid()) throw InputError("tensor shape must have all axes >= 1, got " + shape.str());
  if (data_.size() != shape.numel()) {
    throw InputError("tensor data has " + std::to_string(data_.size()) + " values, shape " +
                     shape.str() + " needs " + std::to_string(shape.numel()));
  }
}

double Tensor::item() const {
  if (data_.size() != 1) throw InputError("item() on a tensor of shape " + shape_.str());
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!(other.shape_ == shape_)) {
    throw InputError("shape mismatch in +=: " + shape_.str() + " vs " + other.shape_.str());
  }
  const double* src = other.data();
  double* dst = data();
  for (std::size_t i = 0, n = data_.size(); i < n; ++i) dst[i] += src[i];
  return *this;
}

Tensor& Tensor::operator*=(double k) {
  for (double& v : data_) v *= k;
  return *this;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != data_.size()) {
    throw InputError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  Tensor out = *this;
  out.shape_ = shape;
  return out;
}

Tensor Tensor::batch_slice(int first, int count) const {
  if (first < 0 || count < 1 || first + count > shape_.n) {
    throw InputError("batch slice out of range for " + shape_.str());
  }
  const std::size_t item = static_cast<std::size_t>(shape_.c) * shape_.plane();
  Tensor out;
  out.shape_ = Shape{count, shape_.c, shape_.h, shape_.w};
  out.data_.assign(data_.begin() + static_cast<std::ptrdiff_t>(first * item),
                   data_.begin() + static_cast<std::ptrdiff_t>((first + count) * item));
  return out;
}

Tensor stack_batch(std::span<const Tensor> items) {
  if (items.empty()) throw InputError("stack_batch needs at least one tensor");
  const Shape first = items.front().shape();
  int total = 0;
  for (const Tensor& t : items) {
    const Shape& s = t.shape();
    if (s.c != first.c || s.h != first.h || s.w != first.w) {
      throw InputError("stack_batch shape mismatch: " + first.str() + " vs " + s.str());
    }
    total += s.n;
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(total) * first.c * first.plane());
  for (const Tensor& t : items) out.insert(out.end(), t.values().begin(), t.values().end());
  return Tensor(Shape{total, first.c, first.h, first.w}, std::move(out));
}

}  // namespace tsi
