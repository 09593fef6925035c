// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Stage-partitioned backbones with early-exit heads.
//
//   input -> stage 1 -> stage 2 -> ... -> stage S
//               |          |                 |
//             exit       exit              exit      (GAP + dense, raw logits)
//
// Exits sit at strictly increasing stage indices and the deepest one is always
// at the last stage, so every backbone stage feeds at least one exit.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aep/layers.hpp"
#include "aep/random.hpp"
#include "aep/tensor.hpp"

namespace aep {

struct ImageShape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  [[nodiscard]] Shape batch(std::size_t n) const noexcept { return {n, channels, height, width}; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

struct StageSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

struct BackboneSpec {
  std::string family;  // micro-vgg | micro-resnet | micro-mobile | micro-linear | custom | external
  ImageShape input;
  std::vector<StageSpec> stages;
  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

/// Output shape (batch 1) of every stage; throws std::invalid_argument when
/// the recipe does not chain or there are no stages. One stage is accepted so
/// truncated sub-networks load back; registered backbones need two or more.
std::vector<Shape> infer_stage_shapes(const BackboneSpec& spec);

struct BackboneOptions {
  double width_scale = 1.0;
  std::size_t depth = 1;  // blocks (or convs) per stage multiplier
  std::uint64_t seed = 0;
};

class Backbone {
 public:
  /// Builds layers with zero parameters; call init_parameters() or load values.
  explicit Backbone(BackboneSpec spec);

  void init_parameters(Rng& rng);

  [[nodiscard]] const BackboneSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] std::size_t num_stages() const noexcept { return stages_.size(); }
  [[nodiscard]] Sequential& stage(std::size_t i) { return stages_.at(i); }
  [[nodiscard]] const Sequential& stage(std::size_t i) const { return stages_.at(i); }
  [[nodiscard]] const std::vector<Shape>& stage_shapes() const noexcept { return shapes_; }
  [[nodiscard]] std::int64_t param_count() const;
  /// Keeps stages [0, last_stage].
  [[nodiscard]] Backbone truncated(std::size_t last_stage) const;

 private:
  BackboneSpec spec_;
  std::vector<Sequential> stages_;
  std::vector<Shape> shapes_;
};

using BackboneFactory = std::function<BackboneSpec(const ImageShape&, const BackboneOptions&)>;

/// Registry of backbone recipes. The built-in micro families are always
/// present; external adapters add their own keys (a recipe plus, at load time,
/// a ParameterSource for pretrained values).
class BackboneRegistry {
 public:
  static void add(std::string key, std::string description, BackboneFactory factory);
  [[nodiscard]] static bool contains(std::string_view key);
  [[nodiscard]] static std::vector<std::string> keys();
  [[nodiscard]] static std::string description(std::string_view key);
  /// Throws NotFoundError for unknown keys.
  [[nodiscard]] static BackboneSpec make_spec(std::string_view key, const ImageShape& input,
                                              const BackboneOptions& options);
};

/// Registry lookup plus seeded initialization.
Backbone build_backbone(std::string_view key, const ImageShape& input,
                        const BackboneOptions& options = {});

/// Global average pooling followed by a dense layer with linear activation.
class ExitHead {
 public:
  ExitHead(std::size_t in_channels, std::size_t num_classes);

  [[nodiscard]] std::size_t in_channels() const noexcept { return in_channels_; }
  [[nodiscard]] std::size_t num_classes() const noexcept { return num_classes_; }
  [[nodiscard]] std::int64_t param_count() const noexcept;
  [[nodiscard]] std::int64_t macs() const noexcept;

  void init_parameters(Rng& rng);
  [[nodiscard]] Tensor forward(const Tensor& features) const;
  Tensor forward_train(const Tensor& features);
  /// Returns the gradient with respect to the stage output.
  Tensor backward(const Tensor& dlogits);
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);

 private:
  [[nodiscard]] Tensor pool(const Tensor& features) const;

  std::size_t in_channels_;
  std::size_t num_classes_;
  Tensor weight_, weight_grad_;  // (classes, channels)
  Tensor bias_, bias_grad_;      // (classes)
  Tensor pooled_;
  Shape feature_shape_{};
};

ExitHead make_exit_head(std::size_t stage_output_channels, std::size_t num_classes);

/// Activation state of each exit; at least one entry is active.
class ExitMask {
 public:
  explicit ExitMask(std::vector<bool> active);
  /// Bit i of `bits` is exit i.
  static ExitMask from_bits(std::uint64_t bits, std::size_t n);
  static ExitMask all(std::size_t n);

  [[nodiscard]] std::size_t size() const noexcept { return active_.size(); }
  [[nodiscard]] bool operator[](std::size_t i) const { return active_.at(i); }
  [[nodiscard]] std::size_t count() const noexcept;
  [[nodiscard]] std::size_t deepest() const;
  [[nodiscard]] std::vector<std::size_t> indices() const;
  [[nodiscard]] std::uint64_t bits() const noexcept;
  [[nodiscard]] const std::vector<bool>& active() const noexcept { return active_; }
  /// Exit-ordered digits, e.g. "0101" for exits 2 and 4.
  [[nodiscard]] std::string str() const;
  static ExitMask parse(std::string_view digits);

  friend bool operator==(const ExitMask&, const ExitMask&) = default;

 private:
  std::vector<bool> active_;
};

enum class AttachPolicy {
  kStrict,       // strictly increasing stages
  kAllowShared,  // non-decreasing; test rigs only
};

class MultiExitModel {
 public:
  MultiExitModel(Backbone backbone, std::vector<std::size_t> exit_stages,
                 std::vector<ExitHead> heads, AttachPolicy policy = AttachPolicy::kStrict);

  [[nodiscard]] const Backbone& backbone() const noexcept { return backbone_; }
  [[nodiscard]] Backbone& backbone() noexcept { return backbone_; }
  [[nodiscard]] std::size_t num_exits() const noexcept { return heads_.size(); }
  [[nodiscard]] std::size_t num_classes() const noexcept { return num_classes_; }
  [[nodiscard]] const std::vector<std::size_t>& exit_stages() const noexcept {
    return exit_stages_;
  }
  [[nodiscard]] const ExitHead& head(std::size_t i) const { return heads_.at(i); }
  [[nodiscard]] ExitHead& head(std::size_t i) { return heads_.at(i); }
  [[nodiscard]] ImageShape input_shape() const noexcept { return backbone_.spec().input; }
  [[nodiscard]] AttachPolicy attach_policy() const noexcept { return policy_; }

  /// Inference-mode forward; one (B, C) logit matrix per exit.
  [[nodiscard]] std::vector<Tensor> forward_all_exits(const Tensor& batch) const;
  /// Training-mode forward; caches activations for backward().
  std::vector<Tensor> forward_train(const Tensor& batch);
  /// Backpropagates per-exit logit gradients, accumulating into parameter grads.
  void backward(std::span<const Tensor> logit_grads);
  void zero_grad();

  /// Named parameters: "stages.<s>.<layer>..." then "exits.<i>.{weight,bias}".
  std::vector<ParamRef> parameters();
  std::vector<BufferRef> buffers();

 private:
  void check_batch(const Tensor& batch) const;

  Backbone backbone_;
  std::vector<std::size_t> exit_stages_;
  std::vector<ExitHead> heads_;
  std::size_t num_classes_ = 0;
  AttachPolicy policy_ = AttachPolicy::kStrict;
};

/// Heads are freshly initialized from rng; backbone parameters are untouched.
MultiExitModel attach_exits(Backbone backbone, std::span<const std::size_t> exit_stages,
                            std::size_t num_classes, Rng& rng);

enum class ExitLayout { kFour, kFull };
std::string_view exit_layout_name(ExitLayout layout);
ExitLayout parse_exit_layout(std::string_view name);
/// kFull: one exit per stage. kFour: four stages spread evenly from the first
/// to the last (all stages when there are fewer than four).
std::vector<std::size_t> exit_stage_indices(std::size_t num_stages, ExitLayout layout);

/// Keeps stages up to the deepest active exit and only the active heads. Values
/// are copied, so outputs equal the corresponding subset of the full model's.
MultiExitModel extract_subnetwork(const MultiExitModel& model, const ExitMask& mask);

/// Copies parameter and buffer values between models by name, pairing exit
/// heads by attach stage; returns the number of tensors copied. Shapes must
/// match for every copied name.
std::size_t copy_matching_state(const MultiExitModel& from, MultiExitModel& to);

/// Adapter hook for externally supplied weights: returns nullptr for unknown names.
using ParameterSource = std::function<const Tensor*(std::string_view name)>;
/// Fills every parameter and buffer the source knows; returns the count. When
/// require_all is set a missing name throws NotFoundError.
std::size_t load_parameters(MultiExitModel& model, const ParameterSource& source,
                            bool require_all);

// Serialization ------------------------------------------------------------

nlohmann::json to_json(const LayerSpec& spec);
LayerSpec layer_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BackboneSpec& spec);
BackboneSpec backbone_spec_from_json(const nlohmann::json& j);

struct Checkpoint {
  MultiExitModel model;
  nlohmann::json meta;
};

/// Writes spec, exit layout, class count and every named tensor.
void save_checkpoint(const std::filesystem::path& path, const MultiExitModel& model,
                     const nlohmann::json& meta = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aep
