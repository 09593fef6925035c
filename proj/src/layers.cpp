// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "aep/simd/kernels.hpp"

namespace aep {

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kResidual: return "residual";
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (LayerKind k : {LayerKind::kConv, LayerKind::kBatchNorm, LayerKind::kRelu,
                      LayerKind::kMaxPool, LayerKind::kResidual}) {
    if (layer_kind_name(k) == name) return k;
  }
  throw std::invalid_argument(fmt::format("unknown layer kind '{}'", name));
}

LayerSpec LayerSpec::conv(std::size_t in, std::size_t out, std::size_t kernel,
                          std::size_t stride, std::size_t padding, bool bias,
                          std::size_t groups) {
  LayerSpec s;
  s.kind = LayerKind::kConv;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  s.bias = bias;
  s.groups = groups;
  return s;
}

LayerSpec LayerSpec::batch_norm(std::size_t channels) {
  LayerSpec s;
  s.kind = LayerKind::kBatchNorm;
  s.in_channels = channels;
  s.out_channels = channels;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::kRelu;
  return s;
}

LayerSpec LayerSpec::max_pool(std::size_t kernel) {
  LayerSpec s;
  s.kind = LayerKind::kMaxPool;
  s.kernel = kernel;
  s.stride = kernel;
  return s;
}

LayerSpec LayerSpec::residual(std::vector<LayerSpec> body, std::vector<LayerSpec> shortcut,
                              bool relu_after_add) {
  LayerSpec s;
  s.kind = LayerKind::kResidual;
  s.body = std::move(body);
  s.shortcut = std::move(shortcut);
  s.relu_after_add = relu_after_add;
  return s;
}

void Layer::cost_breakdown(const std::string& prefix, const Shape& in,
                           std::vector<LayerCost>& out) const {
  out.push_back({prefix, std::string(layer_kind_name(spec().kind)), param_count(), macs(in)});
}

namespace {

void uniform_fill(Tensor& t, double bound, Rng& rng) {
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------------------

class Conv2d final : public Layer {
 public:
  explicit Conv2d(const LayerSpec& s) : spec_(s) {
    if (s.in_channels == 0 || s.out_channels == 0 || s.kernel == 0 || s.stride == 0 ||
        s.groups == 0 || s.in_channels % s.groups != 0 || s.out_channels % s.groups != 0) {
      throw std::invalid_argument(
          fmt::format("invalid conv geometry in={} out={} k={} s={} g={}", s.in_channels,
                      s.out_channels, s.kernel, s.stride, s.groups));
    }
    weight_ = Tensor(Shape{s.out_channels, s.in_channels / s.groups, s.kernel, s.kernel});
    weight_grad_ = Tensor(weight_.shape());
    if (s.bias) {
      bias_ = Tensor(Shape{s.out_channels, 1, 1, 1});
      bias_grad_ = Tensor(bias_.shape());
    }
  }

  LayerSpec spec() const override { return spec_; }

  Shape output_shape(const Shape& in) const override {
    if (in.c != spec_.in_channels) {
      throw std::invalid_argument(fmt::format("conv expects {} input channels, got {}",
                                              spec_.in_channels, in.c));
    }
    if (in.h + 2 * spec_.padding < spec_.kernel || in.w + 2 * spec_.padding < spec_.kernel) {
      throw std::invalid_argument(fmt::format("conv kernel {} does not fit input {}",
                                              spec_.kernel, in.str()));
    }
    return {in.n, spec_.out_channels, (in.h + 2 * spec_.padding - spec_.kernel) / spec_.stride + 1,
            (in.w + 2 * spec_.padding - spec_.kernel) / spec_.stride + 1};
  }

  Tensor forward(const Tensor& x) const override {
    const Shape os = output_shape(x.shape());
    Tensor y(os);
    const auto& k = simd::kernels();
    const Geometry g = geometry(x.shape(), os);
    std::vector<double> col(pointwise() ? 0 : g.kg * g.hw_out);
    for (std::size_t n = 0; n < x.shape().n; ++n) {
      for (std::size_t grp = 0; grp < spec_.groups; ++grp) {
        const double* xin = x.data() + n * x.shape().sample() + grp * g.cin_g * g.hw_in;
        const double* cols = xin;
        if (!pointwise()) {
          im2col(xin, x.shape(), os, col.data());
          cols = col.data();
        }
        double* yout = y.data() + n * os.sample() + grp * g.cout_g * g.hw_out;
        k.gemm(false, false, g.cout_g, g.hw_out, g.kg, weight_.data() + grp * g.cout_g * g.kg,
               g.kg, cols, g.hw_out, yout, g.hw_out, false);
      }
      if (spec_.bias) {
        for (std::size_t c = 0; c < os.c; ++c) {
          double* p = y.data() + n * os.sample() + c * g.hw_out;
          const double b = bias_[c];
          for (std::size_t i = 0; i < g.hw_out; ++i) p[i] += b;
        }
      }
    }
    return y;
  }

  Tensor forward_train(const Tensor& x) override {
    input_ = x;
    return forward(x);
  }

  Tensor backward(const Tensor& dy) override {
    const Shape& is = input_.shape();
    const Shape os = output_shape(is);
    if (dy.shape() != os) throw std::invalid_argument("conv backward: gradient shape mismatch");
    Tensor dx(is);
    const auto& k = simd::kernels();
    const Geometry g = geometry(is, os);
    std::vector<double> col(pointwise() ? 0 : g.kg * g.hw_out);
    std::vector<double> dcol(pointwise() ? 0 : g.kg * g.hw_out);
    for (std::size_t n = 0; n < is.n; ++n) {
      for (std::size_t grp = 0; grp < spec_.groups; ++grp) {
        const double* xin = input_.data() + n * is.sample() + grp * g.cin_g * g.hw_in;
        double* dxin = dx.data() + n * is.sample() + grp * g.cin_g * g.hw_in;
        const double* cols = xin;
        if (!pointwise()) {
          im2col(xin, is, os, col.data());
          cols = col.data();
        }
        const double* dyg = dy.data() + n * os.sample() + grp * g.cout_g * g.hw_out;
        const double* wg = weight_.data() + grp * g.cout_g * g.kg;
        k.gemm(false, true, g.cout_g, g.kg, g.hw_out, dyg, g.hw_out, cols, g.hw_out,
               weight_grad_.data() + grp * g.cout_g * g.kg, g.kg, true);
        if (pointwise()) {
          k.gemm(true, false, g.kg, g.hw_out, g.cout_g, wg, g.kg, dyg, g.hw_out, dxin, g.hw_out,
                 false);
        } else {
          k.gemm(true, false, g.kg, g.hw_out, g.cout_g, wg, g.kg, dyg, g.hw_out, dcol.data(),
                 g.hw_out, false);
          col2im(dcol.data(), is, os, dxin);
        }
      }
      if (spec_.bias) {
        for (std::size_t c = 0; c < os.c; ++c) {
          const double* p = dy.data() + n * os.sample() + c * g.hw_out;
          double acc = 0.0;
          for (std::size_t i = 0; i < g.hw_out; ++i) acc += p[i];
          bias_grad_[c] += acc;
        }
      }
    }
    return dx;
  }

  void init_parameters(Rng& rng) override {
    const double fan_in =
        static_cast<double>(spec_.in_channels / spec_.groups * spec_.kernel * spec_.kernel);
    const double bound = 1.0 / std::sqrt(fan_in);
    uniform_fill(weight_, bound, rng);
    if (spec_.bias) uniform_fill(bias_, bound, rng);
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".weight", &weight_, &weight_grad_});
    if (spec_.bias) out.push_back({prefix + ".bias", &bias_, &bias_grad_});
  }

  std::int64_t param_count() const override {
    return static_cast<std::int64_t>(weight_.size() + bias_.size());
  }

  std::int64_t macs(const Shape& in) const override {
    const Shape os = output_shape(in);
    return static_cast<std::int64_t>(spec_.kernel * spec_.kernel *
                                     (spec_.in_channels / spec_.groups) * spec_.out_channels *
                                     os.h * os.w);
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  struct Geometry {
    std::size_t cin_g, cout_g, kg, hw_in, hw_out;
  };

  Geometry geometry(const Shape& in, const Shape& out) const {
    const std::size_t cin_g = spec_.in_channels / spec_.groups;
    return {cin_g, spec_.out_channels / spec_.groups, cin_g * spec_.kernel * spec_.kernel,
            in.plane(), out.plane()};
  }

  bool pointwise() const { return spec_.kernel == 1 && spec_.stride == 1 && spec_.padding == 0; }

  // Output columns [lo, hi) whose input column ow * stride + kj - pad is in range.
  std::pair<std::size_t, std::size_t> valid_cols(std::size_t kj, std::size_t in_w,
                                                 std::size_t out_w) const {
    const auto pad = static_cast<std::ptrdiff_t>(spec_.padding);
    const auto st = static_cast<std::ptrdiff_t>(spec_.stride);
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kj) - pad;
    std::ptrdiff_t lo = off >= 0 ? 0 : (-off + st - 1) / st;
    const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(in_w) - 1 - off;
    std::ptrdiff_t hi = last < 0 ? 0 : last / st + 1;
    hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_w));
    lo = std::min(lo, hi);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
  }

  // col[(c * k + ki) * k + kj][oh * wo + ow] for the channels of one group.
  // Padding positions are never written: `col` must start zeroed and only be
  // reused for the same geometry.
  void im2col(const double* x, const Shape& in, const Shape& out, double* col) const {
    const std::size_t cin_g = spec_.in_channels / spec_.groups;
    const std::size_t kk = spec_.kernel, st = spec_.stride;
    const auto pad = static_cast<std::ptrdiff_t>(spec_.padding);
    for (std::size_t c = 0; c < cin_g; ++c) {
      const double* plane = x + c * in.plane();
      for (std::size_t ki = 0; ki < kk; ++ki) {
        for (std::size_t kj = 0; kj < kk; ++kj) {
          double* dst = col + ((c * kk + ki) * kk + kj) * out.plane();
          const auto [lo, hi] = valid_cols(kj, in.w, out.w);
          for (std::size_t oh = 0; oh < out.h; ++oh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * st + ki) - pad;
            double* drow = dst + oh * out.w;
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(in.h) || lo == hi) continue;
            // first valid input column
            const double* srow = plane + static_cast<std::size_t>(ih) * in.w +
                                 (lo * st + kj - static_cast<std::size_t>(pad));
            if (st == 1) {
              std::copy(srow, srow + (hi - lo), drow + lo);
            } else {
              for (std::size_t ow = lo; ow < hi; ++ow) drow[ow] = srow[(ow - lo) * st];
            }
          }
        }
      }
    }
  }

  void col2im(const double* col, const Shape& in, const Shape& out, double* dx) const {
    const std::size_t cin_g = spec_.in_channels / spec_.groups;
    const std::size_t kk = spec_.kernel, st = spec_.stride;
    const auto pad = static_cast<std::ptrdiff_t>(spec_.padding);
    for (std::size_t c = 0; c < cin_g; ++c) {
      double* plane = dx + c * in.plane();
      for (std::size_t ki = 0; ki < kk; ++ki) {
        for (std::size_t kj = 0; kj < kk; ++kj) {
          const double* src = col + ((c * kk + ki) * kk + kj) * out.plane();
          const auto [lo, hi] = valid_cols(kj, in.w, out.w);
          for (std::size_t oh = 0; oh < out.h; ++oh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * st + ki) - pad;
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(in.h) || lo == hi) continue;
            double* drow = plane + static_cast<std::size_t>(ih) * in.w +
                           (lo * st + kj - static_cast<std::size_t>(pad));
            const double* srow = src + oh * out.w;
            for (std::size_t ow = lo; ow < hi; ++ow) drow[(ow - lo) * st] += srow[ow];
          }
        }
      }
    }
  }

  LayerSpec spec_;
  Tensor weight_, weight_grad_, bias_, bias_grad_;
  Tensor input_;
};

// ---------------------------------------------------------------------------

class BatchNorm2d final : public Layer {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  explicit BatchNorm2d(const LayerSpec& s) : spec_(s) {
    if (s.in_channels == 0) throw std::invalid_argument("batchnorm needs channels >= 1");
    const Shape ps{s.in_channels, 1, 1, 1};
    gamma_ = Tensor(ps, 1.0);
    beta_ = Tensor(ps, 0.0);
    gamma_grad_ = Tensor(ps);
    beta_grad_ = Tensor(ps);
    running_mean_ = Tensor(ps, 0.0);
    running_var_ = Tensor(ps, 1.0);
  }

  LayerSpec spec() const override { return spec_; }

  Shape output_shape(const Shape& in) const override {
    if (in.c != spec_.in_channels) {
      throw std::invalid_argument(fmt::format("batchnorm expects {} channels, got {}",
                                              spec_.in_channels, in.c));
    }
    return in;
  }

  Tensor forward(const Tensor& x) const override {
    output_shape(x.shape());
    Tensor y(x.shape());
    const Shape& s = x.shape();
    for (std::size_t c = 0; c < s.c; ++c) {
      const double inv_std = 1.0 / std::sqrt(running_var_[c] + kEps);
      const double scale = gamma_[c] * inv_std;
      const double shift = beta_[c] - running_mean_[c] * scale;
      for (std::size_t n = 0; n < s.n; ++n) {
        const double* xp = x.data() + n * s.sample() + c * s.plane();
        double* yp = y.data() + n * s.sample() + c * s.plane();
        for (std::size_t i = 0; i < s.plane(); ++i) yp[i] = xp[i] * scale + shift;
      }
    }
    return y;
  }

  Tensor forward_train(const Tensor& x) override {
    output_shape(x.shape());
    const Shape& s = x.shape();
    const double count = static_cast<double>(s.n * s.plane());
    x_hat_ = Tensor(s);
    inv_std_.assign(s.c, 0.0);
    Tensor y(s);
    for (std::size_t c = 0; c < s.c; ++c) {
      double mean = 0.0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const double* xp = x.data() + n * s.sample() + c * s.plane();
        for (std::size_t i = 0; i < s.plane(); ++i) mean += xp[i];
      }
      mean /= count;
      double var = 0.0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const double* xp = x.data() + n * s.sample() + c * s.plane();
        for (std::size_t i = 0; i < s.plane(); ++i) var += (xp[i] - mean) * (xp[i] - mean);
      }
      var /= count;
      const double inv_std = 1.0 / std::sqrt(var + kEps);
      inv_std_[c] = inv_std;
      for (std::size_t n = 0; n < s.n; ++n) {
        const std::size_t off = n * s.sample() + c * s.plane();
        for (std::size_t i = 0; i < s.plane(); ++i) {
          const double xh = (x[off + i] - mean) * inv_std;
          x_hat_[off + i] = xh;
          y[off + i] = gamma_[c] * xh + beta_[c];
        }
      }
      const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
      running_mean_[c] = (1.0 - kMomentum) * running_mean_[c] + kMomentum * mean;
      running_var_[c] = (1.0 - kMomentum) * running_var_[c] + kMomentum * unbiased;
    }
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    const Shape& s = x_hat_.shape();
    if (dy.shape() != s) throw std::invalid_argument("batchnorm backward: shape mismatch");
    const double count = static_cast<double>(s.n * s.plane());
    Tensor dx(s);
    for (std::size_t c = 0; c < s.c; ++c) {
      double sum_dy = 0.0;
      double sum_dy_xh = 0.0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const std::size_t off = n * s.sample() + c * s.plane();
        for (std::size_t i = 0; i < s.plane(); ++i) {
          sum_dy += dy[off + i];
          sum_dy_xh += dy[off + i] * x_hat_[off + i];
        }
      }
      gamma_grad_[c] += sum_dy_xh;
      beta_grad_[c] += sum_dy;
      const double k = gamma_[c] * inv_std_[c] / count;
      for (std::size_t n = 0; n < s.n; ++n) {
        const std::size_t off = n * s.sample() + c * s.plane();
        for (std::size_t i = 0; i < s.plane(); ++i) {
          dx[off + i] = k * (count * dy[off + i] - sum_dy - x_hat_[off + i] * sum_dy_xh);
        }
      }
    }
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".gamma", &gamma_, &gamma_grad_});
    out.push_back({prefix + ".beta", &beta_, &beta_grad_});
  }

  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override {
    out.push_back({prefix + ".running_mean", &running_mean_});
    out.push_back({prefix + ".running_var", &running_var_});
  }

  std::int64_t param_count() const override {
    return static_cast<std::int64_t>(gamma_.size() + beta_.size());
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm2d>(*this); }

 private:
  LayerSpec spec_;
  Tensor gamma_, beta_, gamma_grad_, beta_grad_, running_mean_, running_var_;
  Tensor x_hat_;
  std::vector<double> inv_std_;
};

// ---------------------------------------------------------------------------

class Relu final : public Layer {
 public:
  LayerSpec spec() const override { return LayerSpec::relu(); }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor forward(const Tensor& x) const override {
    Tensor y(x.shape());
    simd::kernels().relu(x.data(), y.data(), x.size());
    return y;
  }

  Tensor forward_train(const Tensor& x) override {
    input_ = x;
    return forward(x);
  }

  Tensor backward(const Tensor& dy) override {
    if (dy.shape() != input_.shape()) throw std::invalid_argument("relu backward: shape mismatch");
    Tensor dx(dy.shape());
    simd::kernels().relu_backward(input_.data(), dy.data(), dx.data(), dy.size());
    return dx;
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }

 private:
  Tensor input_;
};

// ---------------------------------------------------------------------------

class MaxPool2d final : public Layer {
 public:
  explicit MaxPool2d(const LayerSpec& s) : spec_(s) {
    if (s.kernel == 0) throw std::invalid_argument("maxpool kernel must be >= 1");
  }

  LayerSpec spec() const override { return spec_; }

  Shape output_shape(const Shape& in) const override {
    if (in.h < spec_.kernel || in.w < spec_.kernel) {
      throw std::invalid_argument(
          fmt::format("maxpool {} does not fit input {}", spec_.kernel, in.str()));
    }
    return {in.n, in.c, in.h / spec_.kernel, in.w / spec_.kernel};
  }

  Tensor forward(const Tensor& x) const override {
    std::vector<std::size_t> unused;
    return pool(x, unused);
  }

  Tensor forward_train(const Tensor& x) override {
    input_shape_ = x.shape();
    return pool(x, argmax_);
  }

  Tensor backward(const Tensor& dy) override {
    Tensor dx(input_shape_);
    if (dy.size() != argmax_.size()) throw std::invalid_argument("maxpool backward: mismatch");
    for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax_[i]] += dy[i];
    return dx;
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2d>(*this); }

 private:
  Tensor pool(const Tensor& x, std::vector<std::size_t>& argmax) const {
    const Shape os = output_shape(x.shape());
    const Shape& is = x.shape();
    Tensor y(os);
    argmax.assign(os.numel(), 0);
    const std::size_t k = spec_.kernel;
    std::size_t o = 0;
    for (std::size_t n = 0; n < is.n; ++n) {
      for (std::size_t c = 0; c < is.c; ++c) {
        const std::size_t base = n * is.sample() + c * is.plane();
        for (std::size_t oh = 0; oh < os.h; ++oh) {
          for (std::size_t ow = 0; ow < os.w; ++ow, ++o) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_i = base + oh * k * is.w + ow * k;
            for (std::size_t ki = 0; ki < k; ++ki) {
              for (std::size_t kj = 0; kj < k; ++kj) {
                const std::size_t idx = base + (oh * k + ki) * is.w + ow * k + kj;
                if (x[idx] > best) {
                  best = x[idx];
                  best_i = idx;
                }
              }
            }
            y[o] = best;
            argmax[o] = best_i;
          }
        }
      }
    }
    return y;
  }

  LayerSpec spec_;
  Shape input_shape_{};
  std::vector<std::size_t> argmax_;
};

// ---------------------------------------------------------------------------

class Residual final : public Layer {
 public:
  explicit Residual(const LayerSpec& s)
      : body_(s.body), shortcut_(s.shortcut), relu_after_add_(s.relu_after_add) {
    if (s.body.empty()) throw std::invalid_argument("residual block needs a non-empty body");
  }

  LayerSpec spec() const override {
    return LayerSpec::residual(body_.specs(), shortcut_.specs(), relu_after_add_);
  }

  Shape output_shape(const Shape& in) const override {
    const Shape a = body_.output_shape(in);
    const Shape b = shortcut_.empty() ? in : shortcut_.output_shape(in);
    if (a != b) {
      throw std::invalid_argument(
          fmt::format("residual branches disagree: body {} vs shortcut {}", a.str(), b.str()));
    }
    return a;
  }

  Tensor forward(const Tensor& x) const override {
    Tensor y = body_.forward(x);
    add_shortcut(y, shortcut_.empty() ? x : shortcut_.forward(x));
    if (relu_after_add_) simd::kernels().relu(y.data(), y.data(), y.size());
    return y;
  }

  Tensor forward_train(const Tensor& x) override {
    Tensor y = body_.forward_train(x);
    add_shortcut(y, shortcut_.empty() ? x : shortcut_.forward_train(x));
    if (relu_after_add_) {
      pre_activation_ = y;
      simd::kernels().relu(y.data(), y.data(), y.size());
    }
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    Tensor d = dy;
    if (relu_after_add_) {
      simd::kernels().relu_backward(pre_activation_.data(), dy.data(), d.data(), d.size());
    }
    Tensor dx = body_.backward(d);
    if (shortcut_.empty()) {
      simd::kernels().axpy(1.0, d.data(), dx.data(), dx.size());
    } else {
      const Tensor ds = shortcut_.backward(d);
      simd::kernels().axpy(1.0, ds.data(), dx.data(), dx.size());
    }
    return dx;
  }

  void init_parameters(Rng& rng) override {
    body_.init_parameters(rng);
    shortcut_.init_parameters(rng);
  }
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override {
    body_.collect_params(prefix + ".body", out);
    shortcut_.collect_params(prefix + ".shortcut", out);
  }
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override {
    body_.collect_buffers(prefix + ".body", out);
    shortcut_.collect_buffers(prefix + ".shortcut", out);
  }
  void cost_breakdown(const std::string& prefix, const Shape& in,
                      std::vector<LayerCost>& out) const override {
    body_.cost_breakdown(prefix + ".body", in, out);
    shortcut_.cost_breakdown(prefix + ".shortcut", in, out);
  }
  std::int64_t param_count() const override {
    return body_.param_count() + shortcut_.param_count();
  }
  std::int64_t macs(const Shape& in) const override {
    std::vector<LayerCost> parts;
    cost_breakdown("", in, parts);
    std::int64_t total = 0;
    for (const auto& p : parts) total += p.macs;
    return total;
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Residual>(*this); }

 private:
  static void add_shortcut(Tensor& y, const Tensor& s) {
    if (y.shape() != s.shape()) throw std::invalid_argument("residual add: shape mismatch");
    simd::kernels().axpy(1.0, s.data(), y.data(), y.size());
  }

  Sequential body_;
  Sequential shortcut_;
  bool relu_after_add_;
  Tensor pre_activation_;
};

}  // namespace

std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::kConv: return std::make_unique<Conv2d>(spec);
    case LayerKind::kBatchNorm: return std::make_unique<BatchNorm2d>(spec);
    case LayerKind::kRelu: return std::make_unique<Relu>();
    case LayerKind::kMaxPool: return std::make_unique<MaxPool2d>(spec);
    case LayerKind::kResidual: return std::make_unique<Residual>(spec);
  }
  throw std::invalid_argument("unknown layer kind");
}

// ---------------------------------------------------------------------------

Sequential::Sequential(const std::vector<LayerSpec>& specs) {
  layers_.reserve(specs.size());
  for (const auto& s : specs) layers_.push_back(make_layer(s));
}

Sequential::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

std::vector<LayerSpec> Sequential::specs() const {
  std::vector<LayerSpec> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) out.push_back(l->spec());
  return out;
}

Shape Sequential::output_shape(Shape in) const {
  for (const auto& l : layers_) in = l->output_shape(in);
  return in;
}

Tensor Sequential::forward(const Tensor& x) const {
  if (layers_.empty()) return x;
  Tensor y = layers_.front()->forward(x);
  for (std::size_t i = 1; i < layers_.size(); ++i) y = layers_[i]->forward(y);
  return y;
}

Tensor Sequential::forward_train(const Tensor& x) {
  if (layers_.empty()) return x;
  Tensor y = layers_.front()->forward_train(x);
  for (std::size_t i = 1; i < layers_.size(); ++i) y = layers_[i]->forward_train(y);
  return y;
}

Tensor Sequential::backward(const Tensor& dy) {
  if (layers_.empty()) return dy;
  Tensor d = layers_.back()->backward(dy);
  for (std::size_t i = layers_.size() - 1; i-- > 0;) d = layers_[i]->backward(d);
  return d;
}

void Sequential::init_parameters(Rng& rng) {
  for (auto& l : layers_) l->init_parameters(rng);
}

void Sequential::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect_params(fmt::format("{}.{}", prefix, i), out);
  }
}

void Sequential::collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect_buffers(fmt::format("{}.{}", prefix, i), out);
  }
}

void Sequential::cost_breakdown(const std::string& prefix, Shape in,
                                std::vector<LayerCost>& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->cost_breakdown(fmt::format("{}.{}", prefix, i), in, out);
    in = layers_[i]->output_shape(in);
  }
}

std::int64_t Sequential::param_count() const {
  std::int64_t total = 0;
  for (const auto& l : layers_) total += l->param_count();
  return total;
}

}  // namespace aep
