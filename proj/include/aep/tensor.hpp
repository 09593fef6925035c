// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aep {

/// NCHW shape. Dense activations use H = W = 1.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  [[nodiscard]] std::size_t numel() const noexcept { return n * c * h * w; }
  [[nodiscard]] std::size_t plane() const noexcept { return h * w; }
  [[nodiscard]] std::size_t sample() const noexcept { return c * h * w; }
  [[nodiscard]] Shape with_batch(std::size_t batch) const noexcept { return {batch, c, h, w}; }
  [[nodiscard]] std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Owning, contiguous, double-precision NCHW tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::vector<double> data);

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] double* data() noexcept { return data_.data(); }
  [[nodiscard]] const double* data() const noexcept { return data_.data(); }
  [[nodiscard]] std::span<double> values() noexcept { return data_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return data_; }
  [[nodiscard]] std::vector<double>& storage() noexcept { return data_; }
  [[nodiscard]] const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  /// Row view of a (B, C) matrix stored as (B, C, 1, 1).
  [[nodiscard]] std::span<const double> row(std::size_t n) const noexcept {
    return {data_.data() + n * shape_.sample(), shape_.sample()};
  }
  [[nodiscard]] std::span<double> row(std::size_t n) noexcept {
    return {data_.data() + n * shape_.sample(), shape_.sample()};
  }

  void fill(double v) noexcept;
  /// Copies samples [first, first + count) into a new tensor.
  [[nodiscard]] Tensor slice_batch(std::size_t first, std::size_t count) const;
  /// Gathers the listed samples, in order.
  [[nodiscard]] Tensor gather(std::span<const std::size_t> indices) const;
  void reshape(Shape s);

 private:
  Shape shape_{};
  std::vector<double> data_;
};

/// Builds a (rows, cols) matrix tensor.
inline Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
  return Tensor(Shape{rows, cols, 1, 1}, fill);
}

/// Named reference to a parameter tensor and its gradient accumulator.
struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
};

/// Named reference to a non-trainable state tensor (e.g. running statistics).
struct BufferRef {
  std::string name;
  Tensor* value = nullptr;
};

}  // namespace aep
