// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "cosal/core/error.hpp"

namespace cosal {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

/// Dense row-major tensor with value semantics. Rank is dynamic; network
/// code uses NCHW for feature maps, {C} for per-channel parameters and {1}
/// for scalars.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    for (auto d : shape_) check(d >= 0, "negative dimension in ", shape_str(shape_));
    data_.assign(static_cast<std::size_t>(shape_numel(shape_)), T(0));
  }

  Tensor(Shape shape, T fill) : Tensor(std::move(shape)) {
    std::fill(data_.begin(), data_.end(), fill);
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, T v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(T v) { return Tensor(Shape{1}, v); }

  static Tensor from(Shape shape, std::vector<T> values) {
    Tensor t;
    t.shape_ = std::move(shape);
    check(shape_numel(t.shape_) == static_cast<std::int64_t>(values.size()),
          "value count ", values.size(), " does not fill shape ", shape_str(t.shape_));
    t.data_ = std::move(values);
    return t;
  }

  bool defined() const { return !shape_.empty() || !data_.empty(); }
  const Shape& shape() const { return shape_; }
  std::int64_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // NCHW accessors.
  T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return data_[idx4(n, c, h, w)];
  }
  const T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return data_[idx4(n, c, h, w)];
  }
  T& at(std::int64_t h, std::int64_t w) {
    return data_[static_cast<std::size_t>(h * shape_[1] + w)];
  }
  const T& at(std::int64_t h, std::int64_t w) const {
    return data_[static_cast<std::size_t>(h * shape_[1] + w)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void add_(const Tensor& o) {
    check(same_shape(o), "add_: shape mismatch ", shape_str(shape_), " vs ", shape_str(o.shape_));
    const T* src = o.data();
    T* dst = data();
    for (std::int64_t i = 0, n = numel(); i < n; ++i) dst[i] += src[i];
  }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    std::vector<U> vals(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) vals[i] = static_cast<U>(data_[i]);
    return Tensor<U>::from(shape_, std::move(vals));
  }

 private:
  std::size_t idx4(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w);
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
Tensor<T> ones_like(const Tensor<T>& t) {
  return Tensor<T>::full(t.shape(), T(1));
}

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
  return Tensor<T>::zeros(t.shape());
}

}  // namespace cosal
