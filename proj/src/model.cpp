// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include <fmt/format.h>

#include "aep/archive.hpp"
#include "aep/errors.hpp"
#include "aep/simd/kernels.hpp"

namespace aep {

// ---------------------------------------------------------------------------
// Backbone

std::vector<Shape> infer_stage_shapes(const BackboneSpec& spec) {
  if (spec.input.channels == 0 || spec.input.height == 0 || spec.input.width == 0) {
    throw std::invalid_argument("backbone input shape must be positive");
  }
  // One stage is fine here: sub-networks truncated at their first exit load
  // back from checkpoints. Registered backbones must declare two or more.
  if (spec.stages.empty()) throw std::invalid_argument("backbone has no stages");
  std::vector<Shape> shapes;
  Shape s = spec.input.batch(1);
  for (const auto& stage : spec.stages) {
    for (const auto& layer : stage.layers) s = make_layer(layer)->output_shape(s);
    if (s.c == 0 || s.h == 0 || s.w == 0) {
      throw std::invalid_argument(fmt::format("stage '{}' produces an empty output", stage.name));
    }
    shapes.push_back(s);
  }
  return shapes;
}

Backbone::Backbone(BackboneSpec spec) : spec_(std::move(spec)) {
  shapes_ = infer_stage_shapes(spec_);
  stages_.reserve(spec_.stages.size());
  for (const auto& st : spec_.stages) stages_.emplace_back(st.layers);
}

void Backbone::init_parameters(Rng& rng) {
  for (auto& s : stages_) s.init_parameters(rng);
}

std::int64_t Backbone::param_count() const {
  std::int64_t total = 0;
  for (const auto& s : stages_) total += s.param_count();
  return total;
}

Backbone Backbone::truncated(std::size_t last_stage) const {
  if (last_stage >= stages_.size()) throw std::invalid_argument("truncation past the last stage");
  Backbone out = *this;
  out.spec_.stages.resize(last_stage + 1);
  out.stages_.resize(last_stage + 1);
  out.shapes_.resize(last_stage + 1);
  return out;
}

// ---------------------------------------------------------------------------
// Registry

namespace {

std::size_t scaled(std::size_t base, double width_scale) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(base * width_scale)));
}

void check_options(const ImageShape& input, const BackboneOptions& o) {
  if (input.channels == 0 || input.height == 0 || input.width == 0) {
    throw std::invalid_argument("input shape must be positive");
  }
  if (!(o.width_scale > 0.0) || o.depth == 0) {
    throw std::invalid_argument("width scale and depth must be positive");
  }
}

BackboneSpec micro_vgg5(const ImageShape& input, const BackboneOptions& o) {
  check_options(input, o);
  // VGG16 stacks [2, 2, 3, 3, 3] convs per stage; this keeps the sequential
  // conv-relu-pool pattern at [1, 1, 2, 2, 2].
  constexpr std::size_t kWidths[5] = {8, 16, 24, 32, 32};
  constexpr std::size_t kConvs[5] = {1, 1, 2, 2, 2};
  BackboneSpec spec{"micro-vgg", input, {}};
  std::size_t in = input.channels;
  for (std::size_t s = 0; s < 5; ++s) {
    StageSpec st{fmt::format("stage{}", s + 1), {}};
    const std::size_t out = scaled(kWidths[s], o.width_scale);
    for (std::size_t c = 0; c < kConvs[s] * o.depth; ++c) {
      st.layers.push_back(LayerSpec::conv(in, out, 3, 1, 1, true));
      st.layers.push_back(LayerSpec::relu());
      in = out;
    }
    st.layers.push_back(LayerSpec::max_pool(2));
    spec.stages.push_back(std::move(st));
  }
  return spec;
}

LayerSpec basic_block(std::size_t in, std::size_t out, std::size_t stride) {
  std::vector<LayerSpec> body = {
      LayerSpec::conv(in, out, 3, stride, 1, false), LayerSpec::batch_norm(out),
      LayerSpec::relu(), LayerSpec::conv(out, out, 3, 1, 1, false), LayerSpec::batch_norm(out)};
  std::vector<LayerSpec> shortcut;
  if (stride != 1 || in != out) {
    shortcut = {LayerSpec::conv(in, out, 1, stride, 0, false), LayerSpec::batch_norm(out)};
  }
  return LayerSpec::residual(std::move(body), std::move(shortcut), true);
}

BackboneSpec micro_resnet4(const ImageShape& input, const BackboneOptions& o) {
  check_options(input, o);
  constexpr std::size_t kWidths[4] = {8, 16, 32, 64};
  BackboneSpec spec{"micro-resnet", input, {}};
  std::size_t in = input.channels;
  for (std::size_t s = 0; s < 4; ++s) {
    StageSpec st{fmt::format("stage{}", s + 1), {}};
    const std::size_t out = scaled(kWidths[s], o.width_scale);
    if (s == 0) {
      st.layers.push_back(LayerSpec::conv(in, out, 3, 1, 1, false));
      st.layers.push_back(LayerSpec::batch_norm(out));
      st.layers.push_back(LayerSpec::relu());
      in = out;
    }
    for (std::size_t b = 0; b < o.depth; ++b) {
      st.layers.push_back(basic_block(in, out, (s > 0 && b == 0) ? 2 : 1));
      in = out;
    }
    spec.stages.push_back(std::move(st));
  }
  return spec;
}

std::vector<LayerSpec> inverted_bottleneck(std::size_t in, std::size_t out, std::size_t stride,
                                           std::size_t expand) {
  const std::size_t hidden = in * expand;
  std::vector<LayerSpec> layers;
  if (expand != 1) {
    layers.push_back(LayerSpec::conv(in, hidden, 1, 1, 0, false));
    layers.push_back(LayerSpec::batch_norm(hidden));
    layers.push_back(LayerSpec::relu());
  }
  layers.push_back(LayerSpec::conv(hidden, hidden, 3, stride, 1, false, hidden));
  layers.push_back(LayerSpec::batch_norm(hidden));
  layers.push_back(LayerSpec::relu());
  layers.push_back(LayerSpec::conv(hidden, out, 1, 1, 0, false));
  layers.push_back(LayerSpec::batch_norm(out));
  if (stride == 1 && in == out) return {LayerSpec::residual(std::move(layers), {}, false)};
  return layers;
}

BackboneSpec micro_mobile5(const ImageShape& input, const BackboneOptions& o) {
  check_options(input, o);
  struct Block {
    std::size_t width, stride, expand;
  };
  constexpr Block kBlocks[5] = {{8, 1, 1}, {16, 2, 3}, {24, 2, 3}, {32, 2, 3}, {48, 1, 3}};
  BackboneSpec spec{"micro-mobile", input, {}};
  std::size_t in = input.channels;
  for (std::size_t s = 0; s < 5; ++s) {
    StageSpec st{fmt::format("stage{}", s + 1), {}};
    if (s == 0) {
      const std::size_t stem = scaled(8, o.width_scale);
      st.layers.push_back(LayerSpec::conv(in, stem, 3, 2, 1, false));
      st.layers.push_back(LayerSpec::batch_norm(stem));
      st.layers.push_back(LayerSpec::relu());
      in = stem;
    }
    const std::size_t out = scaled(kBlocks[s].width, o.width_scale);
    for (std::size_t b = 0; b < o.depth; ++b) {
      for (auto& l : inverted_bottleneck(in, out, b == 0 ? kBlocks[s].stride : 1,
                                         kBlocks[s].expand)) {
        st.layers.push_back(std::move(l));
      }
      in = out;
    }
    spec.stages.push_back(std::move(st));
  }
  return spec;
}

BackboneSpec micro_linear2(const ImageShape& input, const BackboneOptions& o) {
  check_options(input, o);
  const std::size_t width = scaled(4, o.width_scale);
  BackboneSpec spec{"micro-linear", input, {}};
  spec.stages.push_back({"stage1", {LayerSpec::conv(input.channels, width, 1, 1, 0, true)}});
  spec.stages.push_back({"stage2", {LayerSpec::conv(width, width, 1, 1, 0, true)}});
  return spec;
}

struct RegistryEntry {
  std::string description;
  BackboneFactory factory;
};

struct Registry {
  std::mutex mu;
  std::map<std::string, RegistryEntry, std::less<>> entries;

  Registry() {
    entries["micro-vgg-5"] = {"5 sequential conv-relu-maxpool stages (8/16/24/32/32 ch)",
                              micro_vgg5};
    entries["micro-resnet-4"] = {"stem + 4 residual stages of basic blocks (8/16/32/64 ch)",
                                 micro_resnet4};
    entries["micro-mobile-5"] = {
        "stride-2 stem + 5 inverted-bottleneck stages with depthwise convs", micro_mobile5};
    entries["micro-linear-2"] = {"2 stages of 1x1 convs without activation (linear probe)",
                                 micro_linear2};
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void BackboneRegistry::add(std::string key, std::string description, BackboneFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  r.entries[std::move(key)] = {std::move(description), std::move(factory)};
}

bool BackboneRegistry::contains(std::string_view key) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  return r.entries.find(key) != r.entries.end();
}

std::vector<std::string> BackboneRegistry::keys() {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  std::vector<std::string> out;
  for (const auto& [k, _] : r.entries) out.push_back(k);
  return out;
}

std::string BackboneRegistry::description(std::string_view key) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  const auto it = r.entries.find(key);
  if (it == r.entries.end()) throw NotFoundError(fmt::format("unknown backbone '{}'", key));
  return it->second.description;
}

BackboneSpec BackboneRegistry::make_spec(std::string_view key, const ImageShape& input,
                                         const BackboneOptions& options) {
  BackboneFactory factory;
  {
    auto& r = registry();
    std::lock_guard lock(r.mu);
    const auto it = r.entries.find(key);
    if (it == r.entries.end()) throw NotFoundError(fmt::format("unknown backbone '{}'", key));
    factory = it->second.factory;
  }
  BackboneSpec spec = factory(input, options);
  if (spec.stages.size() < 2) {
    throw std::invalid_argument(fmt::format("backbone '{}' needs at least 2 stages", key));
  }
  return spec;
}

Backbone build_backbone(std::string_view key, const ImageShape& input,
                        const BackboneOptions& options) {
  Backbone b(BackboneRegistry::make_spec(key, input, options));
  Rng rng(options.seed);
  b.init_parameters(rng);
  return b;
}

// ---------------------------------------------------------------------------
// Exit head

ExitHead::ExitHead(std::size_t in_channels, std::size_t num_classes)
    : in_channels_(in_channels), num_classes_(num_classes) {
  if (in_channels == 0 || num_classes == 0) {
    throw std::invalid_argument("exit head needs channels >= 1 and classes >= 1");
  }
  weight_ = matrix(num_classes, in_channels);
  weight_grad_ = matrix(num_classes, in_channels);
  bias_ = Tensor(Shape{num_classes, 1, 1, 1});
  bias_grad_ = Tensor(bias_.shape());
}

std::int64_t ExitHead::param_count() const noexcept {
  return static_cast<std::int64_t>(in_channels_ * num_classes_ + num_classes_);
}

std::int64_t ExitHead::macs() const noexcept {
  return static_cast<std::int64_t>(in_channels_ * num_classes_);
}

void ExitHead::init_parameters(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels_));
  for (double& v : weight_.values()) v = rng.uniform(-bound, bound);
  for (double& v : bias_.values()) v = rng.uniform(-bound, bound);
}

Tensor ExitHead::pool(const Tensor& features) const {
  const Shape& s = features.shape();
  if (s.c != in_channels_) {
    throw std::invalid_argument(
        fmt::format("exit head expects {} channels, got {}", in_channels_, s.c));
  }
  Tensor pooled = matrix(s.n, s.c);
  const double inv = 1.0 / static_cast<double>(s.plane());
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* p = features.data() + n * s.sample() + c * s.plane();
      double acc = 0.0;
      for (std::size_t i = 0; i < s.plane(); ++i) acc += p[i];
      pooled[n * s.c + c] = acc * inv;
    }
  }
  return pooled;
}

Tensor ExitHead::forward(const Tensor& features) const {
  const Tensor pooled = pool(features);
  const std::size_t b = pooled.shape().n;
  Tensor logits = matrix(b, num_classes_);
  simd::kernels().gemm(false, true, b, num_classes_, in_channels_, pooled.data(), in_channels_,
                       weight_.data(), in_channels_, logits.data(), num_classes_, false);
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t c = 0; c < num_classes_; ++c) logits[n * num_classes_ + c] += bias_[c];
  }
  return logits;
}

Tensor ExitHead::forward_train(const Tensor& features) {
  feature_shape_ = features.shape();
  pooled_ = pool(features);
  const std::size_t b = pooled_.shape().n;
  Tensor logits = matrix(b, num_classes_);
  simd::kernels().gemm(false, true, b, num_classes_, in_channels_, pooled_.data(), in_channels_,
                       weight_.data(), in_channels_, logits.data(), num_classes_, false);
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t c = 0; c < num_classes_; ++c) logits[n * num_classes_ + c] += bias_[c];
  }
  return logits;
}

Tensor ExitHead::backward(const Tensor& dlogits) {
  const std::size_t b = feature_shape_.n;
  if (dlogits.shape() != Shape{b, num_classes_, 1, 1}) {
    throw std::invalid_argument("exit head backward: gradient shape mismatch");
  }
  const auto& k = simd::kernels();
  k.gemm(true, false, num_classes_, in_channels_, b, dlogits.data(), num_classes_, pooled_.data(),
         in_channels_, weight_grad_.data(), in_channels_, true);
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t c = 0; c < num_classes_; ++c) bias_grad_[c] += dlogits[n * num_classes_ + c];
  }
  Tensor dpooled = matrix(b, in_channels_);
  k.gemm(false, false, b, in_channels_, num_classes_, dlogits.data(), num_classes_,
         weight_.data(), in_channels_, dpooled.data(), in_channels_, false);
  Tensor dfeat(feature_shape_);
  const double inv = 1.0 / static_cast<double>(feature_shape_.plane());
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t c = 0; c < in_channels_; ++c) {
      const double g = dpooled[n * in_channels_ + c] * inv;
      double* p = dfeat.data() + n * feature_shape_.sample() + c * feature_shape_.plane();
      std::fill(p, p + feature_shape_.plane(), g);
    }
  }
  return dfeat;
}

void ExitHead::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", &weight_, &weight_grad_});
  out.push_back({prefix + ".bias", &bias_, &bias_grad_});
}

ExitHead make_exit_head(std::size_t stage_output_channels, std::size_t num_classes) {
  return ExitHead(stage_output_channels, num_classes);
}

// ---------------------------------------------------------------------------
// Exit mask

ExitMask::ExitMask(std::vector<bool> active) : active_(std::move(active)) {
  if (count() == 0) throw std::invalid_argument("exit mask needs at least one active exit");
}

ExitMask ExitMask::from_bits(std::uint64_t bits, std::size_t n) {
  if (n == 0 || n > 64) throw std::invalid_argument("exit mask size must be in [1, 64]");
  std::vector<bool> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = ((bits >> i) & 1U) != 0;
  if (n < 64 && (bits >> n) != 0) throw std::invalid_argument("mask bits exceed exit count");
  return ExitMask(std::move(a));
}

ExitMask ExitMask::all(std::size_t n) { return ExitMask(std::vector<bool>(n, true)); }

std::size_t ExitMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(active_.begin(), active_.end(), true));
}

std::size_t ExitMask::deepest() const {
  for (std::size_t i = active_.size(); i-- > 0;) {
    if (active_[i]) return i;
  }
  throw std::logic_error("empty exit mask");
}

std::vector<std::size_t> ExitMask::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < active_.size(); ++i) {
    if (active_[i]) out.push_back(i);
  }
  return out;
}

std::uint64_t ExitMask::bits() const noexcept {
  std::uint64_t b = 0;
  for (std::size_t i = 0; i < active_.size() && i < 64; ++i) {
    if (active_[i]) b |= std::uint64_t{1} << i;
  }
  return b;
}

std::string ExitMask::str() const {
  std::string s;
  for (bool a : active_) s.push_back(a ? '1' : '0');
  return s;
}

ExitMask ExitMask::parse(std::string_view digits) {
  std::vector<bool> a;
  for (char ch : digits) {
    if (ch != '0' && ch != '1') {
      throw std::invalid_argument(fmt::format("bad exit mask '{}'", digits));
    }
    a.push_back(ch == '1');
  }
  return ExitMask(std::move(a));
}

// ---------------------------------------------------------------------------
// Multi-exit model

MultiExitModel::MultiExitModel(Backbone backbone, std::vector<std::size_t> exit_stages,
                               std::vector<ExitHead> heads, AttachPolicy policy)
    : backbone_(std::move(backbone)),
      exit_stages_(std::move(exit_stages)),
      heads_(std::move(heads)),
      policy_(policy) {
  if (heads_.empty() || heads_.size() != exit_stages_.size()) {
    throw std::invalid_argument("need one head per exit stage and at least one exit");
  }
  for (std::size_t i = 0; i < exit_stages_.size(); ++i) {
    if (exit_stages_[i] >= backbone_.num_stages()) {
      throw std::invalid_argument(fmt::format("exit stage {} out of range", exit_stages_[i]));
    }
    if (i > 0) {
      const bool ok = policy_ == AttachPolicy::kStrict ? exit_stages_[i] > exit_stages_[i - 1]
                                                       : exit_stages_[i] >= exit_stages_[i - 1];
      if (!ok) throw std::invalid_argument("exit stages must be strictly increasing");
    }
    if (heads_[i].in_channels() != backbone_.stage_shapes()[exit_stages_[i]].c) {
      throw std::invalid_argument(fmt::format("exit {} expects {} channels, stage gives {}", i,
                                              heads_[i].in_channels(),
                                              backbone_.stage_shapes()[exit_stages_[i]].c));
    }
    if (heads_[i].num_classes() != heads_[0].num_classes()) {
      throw std::invalid_argument("all exits must share the class count");
    }
  }
  if (exit_stages_.back() != backbone_.num_stages() - 1) {
    throw std::invalid_argument("the deepest exit must sit at the final stage");
  }
  num_classes_ = heads_[0].num_classes();
}

void MultiExitModel::check_batch(const Tensor& batch) const {
  const Shape& s = batch.shape();
  const ImageShape in = input_shape();
  if (s.n == 0 || s.c != in.channels || s.h != in.height || s.w != in.width) {
    throw std::invalid_argument(fmt::format("batch {} does not match model input ({}, {}, {})",
                                            s.str(), in.channels, in.height, in.width));
  }
}

std::vector<Tensor> MultiExitModel::forward_all_exits(const Tensor& batch) const {
  check_batch(batch);
  std::vector<Tensor> out(heads_.size());
  Tensor x = batch;
  std::size_t next = 0;
  for (std::size_t s = 0; s < backbone_.num_stages(); ++s) {
    x = backbone_.stage(s).forward(x);
    while (next < heads_.size() && exit_stages_[next] == s) {
      out[next] = heads_[next].forward(x);
      ++next;
    }
  }
  return out;
}

std::vector<Tensor> MultiExitModel::forward_train(const Tensor& batch) {
  check_batch(batch);
  std::vector<Tensor> out(heads_.size());
  Tensor x = batch;
  std::size_t next = 0;
  for (std::size_t s = 0; s < backbone_.num_stages(); ++s) {
    x = backbone_.stage(s).forward_train(x);
    while (next < heads_.size() && exit_stages_[next] == s) {
      out[next] = heads_[next].forward_train(x);
      ++next;
    }
  }
  return out;
}

void MultiExitModel::backward(std::span<const Tensor> logit_grads) {
  if (logit_grads.size() != heads_.size()) {
    throw std::invalid_argument("backward needs one logit gradient per exit");
  }
  Tensor g;
  std::size_t next = heads_.size();
  for (std::size_t s = backbone_.num_stages(); s-- > 0;) {
    while (next > 0 && exit_stages_[next - 1] == s) {
      --next;
      Tensor dh = heads_[next].backward(logit_grads[next]);
      if (g.empty()) {
        g = std::move(dh);
      } else {
        simd::kernels().axpy(1.0, dh.data(), g.data(), g.size());
      }
    }
    g = backbone_.stage(s).backward(g);
  }
}

void MultiExitModel::zero_grad() {
  for (auto& p : parameters()) p.grad->fill(0.0);
}

std::vector<ParamRef> MultiExitModel::parameters() {
  std::vector<ParamRef> out;
  for (std::size_t s = 0; s < backbone_.num_stages(); ++s) {
    backbone_.stage(s).collect_params(fmt::format("stages.{}", s), out);
  }
  for (std::size_t i = 0; i < heads_.size(); ++i) {
    heads_[i].collect_params(fmt::format("exits.{}", i), out);
  }
  return out;
}

std::vector<BufferRef> MultiExitModel::buffers() {
  std::vector<BufferRef> out;
  for (std::size_t s = 0; s < backbone_.num_stages(); ++s) {
    backbone_.stage(s).collect_buffers(fmt::format("stages.{}", s), out);
  }
  return out;
}

MultiExitModel attach_exits(Backbone backbone, std::span<const std::size_t> exit_stages,
                            std::size_t num_classes, Rng& rng) {
  if (exit_stages.empty()) throw std::invalid_argument("need at least one exit");
  std::vector<ExitHead> heads;
  for (std::size_t idx : exit_stages) {
    if (idx >= backbone.num_stages()) {
      throw std::invalid_argument(fmt::format("exit stage {} out of range", idx));
    }
    heads.push_back(make_exit_head(backbone.stage_shapes()[idx].c, num_classes));
    heads.back().init_parameters(rng);
  }
  return MultiExitModel(std::move(backbone), {exit_stages.begin(), exit_stages.end()},
                        std::move(heads));
}

std::string_view exit_layout_name(ExitLayout layout) {
  return layout == ExitLayout::kFour ? "4" : "full";
}

ExitLayout parse_exit_layout(std::string_view name) {
  if (name == "4") return ExitLayout::kFour;
  if (name == "full") return ExitLayout::kFull;
  throw std::invalid_argument(fmt::format("unknown exit layout '{}' (expected 4 or full)", name));
}

std::vector<std::size_t> exit_stage_indices(std::size_t num_stages, ExitLayout layout) {
  if (num_stages == 0) throw std::invalid_argument("backbone has no stages");
  std::vector<std::size_t> out;
  if (layout == ExitLayout::kFull || num_stages <= 4) {
    for (std::size_t s = 0; s < num_stages; ++s) out.push_back(s);
    return out;
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const double pos = static_cast<double>(k) * static_cast<double>(num_stages - 1) / 3.0;
    out.push_back(static_cast<std::size_t>(std::llround(pos)));
  }
  return out;
}

MultiExitModel extract_subnetwork(const MultiExitModel& model, const ExitMask& mask) {
  if (mask.size() != model.num_exits()) {
    throw std::invalid_argument(fmt::format("mask has {} entries, model has {} exits", mask.size(),
                                            model.num_exits()));
  }
  const std::size_t last = model.exit_stages()[mask.deepest()];
  std::vector<std::size_t> stages;
  std::vector<ExitHead> heads;
  for (std::size_t i : mask.indices()) {
    stages.push_back(model.exit_stages()[i]);
    heads.push_back(model.head(i));
  }
  return MultiExitModel(model.backbone().truncated(last), std::move(stages), std::move(heads),
                        model.attach_policy());
}

std::size_t copy_matching_state(const MultiExitModel& from, MultiExitModel& to) {
  // Heads are matched by the stage they sit on, not by exit index, so a
  // single-exit checkpoint seeds the deepest head of a multi-exit model.
  auto by_stage = [](const MultiExitModel& m, std::string_view name) {
    if (!name.starts_with("exits.")) return std::string(name);
    const auto dot = name.find('.', 6);
    const auto i = static_cast<std::size_t>(std::stoul(std::string(name.substr(6, dot - 6))));
    return fmt::format("exit@{}{}", m.exit_stages().at(i), name.substr(dot));
  };
  // Read-only use of the source tensors.
  auto& src = const_cast<MultiExitModel&>(from);
  std::map<std::string, const Tensor*, std::less<>> values;
  for (const auto& p : src.parameters()) values[by_stage(from, p.name)] = p.value;
  for (const auto& b : src.buffers()) values[by_stage(from, b.name)] = b.value;
  return load_parameters(
      to,
      [&](std::string_view name) -> const Tensor* {
        const auto it = values.find(by_stage(to, name));
        return it == values.end() ? nullptr : it->second;
      },
      false);
}

std::size_t load_parameters(MultiExitModel& model, const ParameterSource& source,
                            bool require_all) {
  std::size_t copied = 0;
  auto assign = [&](const std::string& name, Tensor* dst) {
    const Tensor* t = source(name);
    if (t == nullptr) {
      if (require_all) throw NotFoundError(fmt::format("no value for '{}'", name));
      return;
    }
    if (t->size() != dst->size()) {
      throw std::invalid_argument(fmt::format("'{}' has {} values, expected {}", name, t->size(),
                                              dst->size()));
    }
    std::copy(t->values().begin(), t->values().end(), dst->values().begin());
    ++copied;
  };
  for (const auto& p : model.parameters()) assign(p.name, p.value);
  for (const auto& b : model.buffers()) assign(b.name, b.value);
  return copied;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const LayerSpec& s) {
  nlohmann::json j;
  j["type"] = layer_kind_name(s.kind);
  switch (s.kind) {
    case LayerKind::kConv:
      j["in"] = s.in_channels;
      j["out"] = s.out_channels;
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["padding"] = s.padding;
      j["groups"] = s.groups;
      j["bias"] = s.bias;
      break;
    case LayerKind::kBatchNorm: j["channels"] = s.in_channels; break;
    case LayerKind::kMaxPool: j["kernel"] = s.kernel; break;
    case LayerKind::kResidual: {
      j["body"] = nlohmann::json::array();
      for (const auto& l : s.body) j["body"].push_back(to_json(l));
      j["shortcut"] = nlohmann::json::array();
      for (const auto& l : s.shortcut) j["shortcut"].push_back(to_json(l));
      j["relu_after_add"] = s.relu_after_add;
      break;
    }
    case LayerKind::kRelu: break;
  }
  return j;
}

LayerSpec layer_spec_from_json(const nlohmann::json& j) {
  const LayerKind kind = parse_layer_kind(j.at("type").get<std::string>());
  switch (kind) {
    case LayerKind::kConv:
      return LayerSpec::conv(j.at("in"), j.at("out"), j.at("kernel"), j.at("stride"),
                             j.at("padding"), j.at("bias"), j.at("groups"));
    case LayerKind::kBatchNorm: return LayerSpec::batch_norm(j.at("channels"));
    case LayerKind::kMaxPool: return LayerSpec::max_pool(j.at("kernel"));
    case LayerKind::kRelu: return LayerSpec::relu();
    case LayerKind::kResidual: {
      std::vector<LayerSpec> body, shortcut;
      for (const auto& l : j.at("body")) body.push_back(layer_spec_from_json(l));
      for (const auto& l : j.at("shortcut")) shortcut.push_back(layer_spec_from_json(l));
      return LayerSpec::residual(std::move(body), std::move(shortcut), j.at("relu_after_add"));
    }
  }
  throw std::invalid_argument("unknown layer kind");
}

nlohmann::json to_json(const BackboneSpec& spec) {
  nlohmann::json j;
  j["family"] = spec.family;
  j["input"] = {spec.input.channels, spec.input.height, spec.input.width};
  j["stages"] = nlohmann::json::array();
  for (const auto& st : spec.stages) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : st.layers) layers.push_back(to_json(l));
    j["stages"].push_back({{"name", st.name}, {"layers", layers}});
  }
  return j;
}

BackboneSpec backbone_spec_from_json(const nlohmann::json& j) {
  BackboneSpec spec;
  spec.family = j.at("family").get<std::string>();
  const auto in = j.at("input").get<std::vector<std::size_t>>();
  if (in.size() != 3) throw std::invalid_argument("backbone input must have 3 dims");
  spec.input = {in[0], in[1], in[2]};
  for (const auto& st : j.at("stages")) {
    StageSpec s{st.at("name").get<std::string>(), {}};
    for (const auto& l : st.at("layers")) s.layers.push_back(layer_spec_from_json(l));
    spec.stages.push_back(std::move(s));
  }
  return spec;
}

void save_checkpoint(const std::filesystem::path& path, const MultiExitModel& model,
                     const nlohmann::json& meta) {
  Archive ar;
  ar.meta["kind"] = "aep-checkpoint";
  ar.meta["version"] = 1;
  ar.meta["backbone"] = to_json(model.backbone().spec());
  ar.meta["exit_stages"] = model.exit_stages();
  ar.meta["num_classes"] = model.num_classes();
  ar.meta["attach_policy"] = model.attach_policy() == AttachPolicy::kStrict ? "strict" : "shared";
  ar.meta["user"] = meta;
  auto& m = const_cast<MultiExitModel&>(model);  // tensors are only read
  auto dims = [](const Tensor& t) {
    const Shape& s = t.shape();
    return std::vector<std::size_t>{s.n, s.c, s.h, s.w};
  };
  for (const auto& p : m.parameters()) ar.add(p.name, dims(*p.value), p.value->storage());
  for (const auto& b : m.buffers()) ar.add(b.name, dims(*b.value), b.value->storage());
  ar.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Archive ar = Archive::load(path);
  if (ar.meta.value("kind", "") != "aep-checkpoint") {
    throw FormatError(fmt::format("'{}' is not a checkpoint", path.string()));
  }
  try {
    Backbone backbone(backbone_spec_from_json(ar.meta.at("backbone")));
    const auto stages = ar.meta.at("exit_stages").get<std::vector<std::size_t>>();
    const auto classes = ar.meta.at("num_classes").get<std::size_t>();
    std::vector<ExitHead> heads;
    for (std::size_t s : stages) {
      if (s >= backbone.num_stages()) throw FormatError("exit stage out of range");
      heads.emplace_back(backbone.stage_shapes()[s].c, classes);
    }
    const AttachPolicy policy = ar.meta.value("attach_policy", "strict") == "shared"
                                    ? AttachPolicy::kAllowShared
                                    : AttachPolicy::kStrict;
    MultiExitModel model(std::move(backbone), stages, std::move(heads), policy);
    std::map<std::string, Tensor, std::less<>> tensors;
    for (const auto& a : ar.arrays()) {
      if (a.is_int || a.dims.size() != 4) {
        throw FormatError(fmt::format("bad tensor '{}' in checkpoint", a.name));
      }
      tensors.emplace(a.name, Tensor(Shape{a.dims[0], a.dims[1], a.dims[2], a.dims[3]}, a.f64));
    }
    load_parameters(
        model,
        [&](std::string_view name) -> const Tensor* {
          const auto it = tensors.find(name);
          return it == tensors.end() ? nullptr : &it->second;
        },
        true);
    return {std::move(model), ar.meta.value("user", nlohmann::json::object())};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("bad checkpoint metadata: {}", e.what()));
  } catch (const NotFoundError& e) {
    throw FormatError(fmt::format("incomplete checkpoint: {}", e.what()));
  }
}

}  // namespace aep
