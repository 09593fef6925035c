// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/tensor.hpp"

#include <algorithm>
#include <cstring>

#include <fmt/format.h>

namespace aep {

std::string Shape::str() const { return fmt::format("({}, {}, {}, {})", n, c, h, w); }

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw std::invalid_argument(fmt::format("tensor data size {} does not match shape {}",
                                            data_.size(), shape_.str()));
  }
}

void Tensor::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::slice_batch(std::size_t first, std::size_t count) const {
  if (first + count > shape_.n) {
    throw std::out_of_range(fmt::format("batch slice [{}, {}) out of range for {}", first,
                                        first + count, shape_.str()));
  }
  Tensor out(shape_.with_batch(count));
  const std::size_t stride = shape_.sample();
  std::memcpy(out.data(), data_.data() + first * stride, count * stride * sizeof(double));
  return out;
}

Tensor Tensor::gather(std::span<const std::size_t> indices) const {
  Tensor out(shape_.with_batch(indices.size()));
  const std::size_t stride = shape_.sample();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= shape_.n) throw std::out_of_range("gather index out of range");
    std::memcpy(out.data() + i * stride, data_.data() + indices[i] * stride,
                stride * sizeof(double));
  }
  return out;
}

void Tensor::reshape(Shape s) {
  if (s.numel() != data_.size()) {
    throw std::invalid_argument(
        fmt::format("cannot reshape {} elements to {}", data_.size(), s.str()));
  }
  shape_ = s;
}

}  // namespace aep
