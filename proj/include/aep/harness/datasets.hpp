// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dataset registry and ingestion: raw sources -> stratified train/val/test
// carve -> optional stratified subsample -> bicubic resize -> per-channel
// normalization with training-split statistics.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aep/data.hpp"
#include "aep/random.hpp"

namespace aep::harness {

enum class DatasetSource { kBuiltin, kLocalDirectory, kSynthetic };

struct DatasetSpec {
  std::string name;
  std::size_t num_classes = 0;
  std::size_t channels = 3;  // native channels; grayscale is replicated to 3 on load
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  bool balanced = true;
  double subsample = 1.0;  // desk-scale default fraction
  DatasetSource source = DatasetSource::kBuiltin;
  std::string subdir;  // under the data root

  [[nodiscard]] std::size_t total() const noexcept { return train + val + test; }
  /// Throws std::invalid_argument on zero sizes or fewer than two classes.
  void validate() const;
};

class DatasetRegistry {
 public:
  /// Throws NotFoundError for unknown names.
  static const DatasetSpec& get(std::string_view name);
  static bool contains(std::string_view name);
  static std::vector<std::string> keys();
};

struct LoadOptions {
  std::filesystem::path root = "data";
  std::size_t image_size = 64;
  /// Fraction of every split in (0, 1]; 0 selects the dataset default. Values
  /// above 1 are read as a total sample count across the three splits.
  double subsample = 0.0;
  std::uint64_t seed = 0;
  bool normalize = true;
  // synthetic-blobs only
  std::size_t synthetic_classes = 2;
  std::size_t synthetic_samples = 300;
};

struct DatasetSplits {
  DatasetSpec spec;
  Split train, val, test;
  std::vector<double> channel_mean;
  std::vector<double> channel_std;
};

/// Throws NotFoundError when source files are missing, FormatError when they
/// cannot be parsed.
DatasetSplits load_dataset(const DatasetSpec& spec, const LoadOptions& options);
DatasetSplits load_dataset(std::string_view name, const LoadOptions& options);

/// Resolves LoadOptions::subsample against a spec.
double effective_fraction(const DatasetSpec& spec, double subsample);

/// Per-class quotas summing to `count`: largest remainder on class
/// proportions, at least one per non-empty class when count allows.
std::vector<std::size_t> stratified_quotas(std::span<const std::size_t> class_counts,
                                           std::size_t count);

/// Sorted sample indices drawn class by class according to stratified_quotas.
std::vector<std::size_t> stratified_sample(std::span<const std::size_t> labels,
                                           std::size_t num_classes, std::size_t count, Rng& rng);

/// Bicubic resampling of one plane (a = -0.5, filter support widened by the
/// scale factor when shrinking), separable: horizontal pass then vertical.
void resize_bicubic(const double* src, std::size_t h, std::size_t w, double* dst, std::size_t oh,
                    std::size_t ow);

/// Resizes every plane of an (N, C, H, W) tensor.
Tensor resize_images(const Tensor& images, std::size_t height, std::size_t width);

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // population; 1 for constant channels
};
ChannelStats channel_stats(const Tensor& images);
void normalize_channels(Tensor& images, const ChannelStats& stats);

/// Linearly separable blobs rendered as constant-per-channel images; carved
/// 2/3, 1/6, 1/6 with stratification.
DatasetSplits make_blobs(std::size_t num_classes, std::size_t samples, std::size_t channels,
                         std::size_t image_size, std::uint64_t seed);

}  // namespace aep::harness
