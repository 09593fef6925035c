// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/data.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace aep {

void Split::validate() const {
  if (images.shape().n != labels.size()) {
    throw std::invalid_argument(fmt::format("split has {} images but {} labels",
                                            images.shape().n, labels.size()));
  }
  for (std::size_t y : labels) {
    if (y >= num_classes) {
      throw std::invalid_argument(fmt::format("label {} out of range for {} classes", y,
                                              num_classes));
    }
  }
}

Split Split::subset(std::span<const std::size_t> indices) const {
  Split out;
  out.images = images.gather(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels.at(i));
  out.num_classes = num_classes;
  return out;
}

Split Split::range(std::size_t first, std::size_t count) const {
  Split out;
  out.images = images.slice_batch(first, count);
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(first),
                    labels.begin() + static_cast<std::ptrdiff_t>(first + count));
  out.num_classes = num_classes;
  return out;
}

}  // namespace aep
