// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Backbone building blocks. A LayerSpec is the value-type recipe (what is
// serialized into checkpoints); a Layer is the instantiated object holding
// parameters and the activations cached for backward.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "aep/random.hpp"
#include "aep/tensor.hpp"

namespace aep {

enum class LayerKind { kConv, kBatchNorm, kRelu, kMaxPool, kResidual };

std::string_view layer_kind_name(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  // conv / batch-norm / pool geometry
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
  bool bias = true;
  // residual: y = body(x) + shortcut(x), shortcut empty means identity
  std::vector<LayerSpec> body;
  std::vector<LayerSpec> shortcut;
  bool relu_after_add = true;

  static LayerSpec conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                        std::size_t padding, bool bias = true, std::size_t groups = 1);
  static LayerSpec batch_norm(std::size_t channels);
  static LayerSpec relu();
  static LayerSpec max_pool(std::size_t kernel);
  static LayerSpec residual(std::vector<LayerSpec> body, std::vector<LayerSpec> shortcut,
                            bool relu_after_add);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Per-layer cost entry; composite layers contribute one entry per leaf.
struct LayerCost {
  std::string name;
  std::string kind;
  std::int64_t params = 0;
  std::int64_t macs = 0;
};

class Layer {
 public:
  virtual ~Layer() = default;

  [[nodiscard]] virtual LayerSpec spec() const = 0;
  /// Static shape inference; throws std::invalid_argument on mismatch.
  [[nodiscard]] virtual Shape output_shape(const Shape& in) const = 0;

  /// Inference pass (running statistics, no caching).
  [[nodiscard]] virtual Tensor forward(const Tensor& x) const = 0;
  /// Training pass: batch statistics, caches what backward needs.
  virtual Tensor forward_train(const Tensor& x) = 0;
  /// Accumulates parameter gradients and returns the input gradient.
  virtual Tensor backward(const Tensor& dy) = 0;

  virtual void init_parameters(Rng& /*rng*/) {}
  virtual void collect_params(const std::string& /*prefix*/, std::vector<ParamRef>& /*out*/) {}
  virtual void collect_buffers(const std::string& /*prefix*/, std::vector<BufferRef>& /*out*/) {}
  virtual void cost_breakdown(const std::string& prefix, const Shape& in,
                              std::vector<LayerCost>& out) const;
  [[nodiscard]] virtual std::int64_t param_count() const { return 0; }
  [[nodiscard]] virtual std::int64_t macs(const Shape& /*in*/) const { return 0; }

  [[nodiscard]] virtual std::unique_ptr<Layer> clone() const = 0;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec);

/// Ordered layer list with value semantics.
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(const std::vector<LayerSpec>& specs);
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  [[nodiscard]] std::vector<LayerSpec> specs() const;
  [[nodiscard]] Shape output_shape(Shape in) const;
  [[nodiscard]] Tensor forward(const Tensor& x) const;
  Tensor forward_train(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void init_parameters(Rng& rng);
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out);
  void cost_breakdown(const std::string& prefix, Shape in, std::vector<LayerCost>& out) const;
  [[nodiscard]] std::int64_t param_count() const;
  [[nodiscard]] std::size_t size() const noexcept { return layers_.size(); }
  [[nodiscard]] bool empty() const noexcept { return layers_.empty(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace aep
