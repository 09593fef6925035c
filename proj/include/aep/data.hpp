// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aep/tensor.hpp"

namespace aep {

/// Images (N, C, H, W) with one class index per sample.
struct Split {
  Tensor images;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
  [[nodiscard]] bool empty() const noexcept { return labels.empty(); }
  /// Throws std::invalid_argument when images/labels disagree or a label is >= num_classes.
  void validate() const;
  [[nodiscard]] Split subset(std::span<const std::size_t> indices) const;
  [[nodiscard]] Split range(std::size_t first, std::size_t count) const;
};

}  // namespace aep
